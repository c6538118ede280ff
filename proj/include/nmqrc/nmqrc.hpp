#pragma once

#include "nmqrc/errors.hpp"
#include "nmqrc/esp.hpp"
#include "nmqrc/hamiltonian.hpp"
#include "nmqrc/harness.hpp"
#include "nmqrc/linalg.hpp"
#include "nmqrc/random.hpp"
#include "nmqrc/readout.hpp"
#include "nmqrc/reservoir.hpp"
#include "nmqrc/tasks.hpp"
