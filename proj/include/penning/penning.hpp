#pragma once

#include "penning/analysis.hpp"
#include "penning/axial_modes.hpp"
#include "penning/constants.hpp"
#include "penning/couplings.hpp"
#include "penning/delaunay.hpp"
#include "penning/equilibrium.hpp"
#include "penning/errors.hpp"
#include "penning/io.hpp"
#include "penning/params.hpp"
#include "penning/planar_modes.hpp"
#include "penning/seed_lattice.hpp"
#include "penning/version.hpp"
