#include <cstdio>

int main() {
    std::puts("penning: not yet wired");
    return 0;
}
