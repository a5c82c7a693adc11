#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "penning/errors.hpp"
#include "penning/params.hpp"
#include "penning/version.hpp"

namespace penning {
namespace io {

using json = nlohmann::json;

// ---------- numeric formatting ----------

// Shortest digit string that round-trips the exact double (locale free).
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v,
                             std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc())
        throw ValidationError("cannot parse number from '" + s + "'");
    return v;
}

// ---------- CSV ----------

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << "\n";
    }
    if (!out)
        throw NumericalError("write failed: " + path.string());
}

inline void write_matrix_csv(const std::filesystem::path& path,
                             const std::vector<std::string>& header,
                             const Eigen::MatrixXd& m) {
    std::vector<std::vector<std::string>> rows(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        rows[r].reserve(m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            rows[r].push_back(format_double(m(r, c)));
    }
    write_csv(path, header, rows);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open for reading: " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

inline Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.rows.empty())
        throw ValidationError("empty matrix file: " + path.string());
    Eigen::MatrixXd m(t.rows.size(), t.rows[0].size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r].size() != t.rows[0].size())
            throw ValidationError("ragged matrix file: " + path.string());
        for (std::size_t c = 0; c < t.rows[r].size(); ++c)
            m(r, c) = parse_double(t.rows[r][c]);
    }
    return m;
}

// ---------- JSON helpers ----------

inline json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Eigen::VectorXd vector_from_json(const json& arr) {
    if (!arr.is_array())
        throw ValidationError("expected a JSON array of numbers");
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    return v;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& rows) {
    if (!rows.is_array() || rows.empty())
        throw ValidationError("expected a JSON array of arrays");
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw ValidationError("ragged JSON matrix");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(r, c) = rows[r][c].get<double>();
    }
    return m;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
    if (!out)
        throw NumericalError("write failed: " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open for reading: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

// ---------- trap config ----------

// Accepted configuration keys.  Frequencies are entered relative to
// omega_z except omega_z itself, which is an ordinary frequency in Hz.
inline TrapConfig config_from_json(const json& j) {
    static const std::set<std::string> known = {
        "n_ions",        "omega_z_hz",           "omega_c_over_omega_z",
        "omega_wall_over_omega_z", "omega_eff_over_omega_z", "omega_rot_over_omega_z",
        "wall_sign",     "mass_u",               "charge_c",
        "k_e_si",
    };
    if (!j.is_object())
        throw ValidationError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key))
            throw ValidationError("unknown config key: '" + key + "'");
    }
    for (const char* req : {"n_ions", "omega_z_hz", "omega_c_over_omega_z"})
        if (!j.contains(req))
            throw ValidationError(std::string("missing config key: '") + req + "'");
    const bool has_eff = j.contains("omega_eff_over_omega_z");
    const bool has_rot = j.contains("omega_rot_over_omega_z");
    if (has_eff == has_rot)
        throw ValidationError(
            "exactly one of omega_eff_over_omega_z or omega_rot_over_omega_z is required");

    TrapConfig cfg;
    try {
        cfg.n_ions = j.at("n_ions").get<int>();
        cfg.omega_z = 2.0 * constants::pi * j.at("omega_z_hz").get<double>();
        cfg.omega_c = j.at("omega_c_over_omega_z").get<double>() * cfg.omega_z;
        cfg.omega_wall =
            j.value("omega_wall_over_omega_z", 0.0) * cfg.omega_z;
        cfg.wall_sign = j.value("wall_sign", 1);
        if (j.contains("mass_u"))
            cfg.mass = j.at("mass_u").get<double>() * constants::atomic_mass_kg;
        if (j.contains("charge_c")) cfg.charge = j.at("charge_c").get<double>();
        if (j.contains("k_e_si")) cfg.k_e = j.at("k_e_si").get<double>();
        if (has_eff)
            cfg.rotation = {RotationKind::effective_frequency,
                            j.at("omega_eff_over_omega_z").get<double>() * cfg.omega_z};
        else
            cfg.rotation = {RotationKind::rotation_frequency,
                            j.at("omega_rot_over_omega_z").get<double>() * cfg.omega_z};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config value: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

inline TrapConfig load_config(const std::filesystem::path& path) {
    return config_from_json(read_json(path));
}

// Round-trippable snapshot of a parsed configuration.
inline json config_to_json(const TrapConfig& cfg) {
    json j;
    j["n_ions"] = cfg.n_ions;
    j["omega_z_hz"] = cfg.omega_z / (2.0 * constants::pi);
    j["omega_c_over_omega_z"] = cfg.omega_c / cfg.omega_z;
    j["omega_wall_over_omega_z"] = cfg.omega_wall / cfg.omega_z;
    j["wall_sign"] = cfg.wall_sign;
    j["mass_u"] = cfg.mass / constants::atomic_mass_kg;
    j["charge_c"] = cfg.charge;
    j["k_e_si"] = cfg.k_e;
    if (cfg.rotation.kind == RotationKind::effective_frequency)
        j["omega_eff_over_omega_z"] = cfg.rotation.value / cfg.omega_z;
    else
        j["omega_rot_over_omega_z"] = cfg.rotation.value / cfg.omega_z;
    return j;
}

// ---------- digests and manifests ----------

inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot digest missing file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

// Provenance record written next to every command's outputs.
class Manifest {
public:
    Manifest(std::string command, json config_snapshot)
        : command_(std::move(command)), config_(std::move(config_snapshot)) {}

    void tolerance(const std::string& name, double value) { tolerances_[name] = value; }
    void input(const std::filesystem::path& path) {
        inputs_[path.filename().string()] = file_digest(path);
    }
    void output(const std::filesystem::path& path) {
        outputs_[path.filename().string()] = file_digest(path);
    }
    void timing(const std::string& stage, double ms) { timings_[stage] = ms; }

    void write(const std::filesystem::path& path) const {
        json j;
        j["tool_version"] = version_string;
        j["command"] = command_;
        j["config"] = config_;
        j["tolerances"] = tolerances_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["timings_ms"] = timings_;
        write_json(path, j);
    }

private:
    std::string command_;
    json config_;
    std::map<std::string, double> tolerances_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
    std::map<std::string, double> timings_;
};

} // namespace io
} // namespace penning
