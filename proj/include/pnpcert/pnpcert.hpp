#pragma once

#include "certify.hpp"
#include "core.hpp"
#include "denoisers.hpp"
#include "equivariance.hpp"
#include "experiment.hpp"
#include "fidelity.hpp"
#include "groups.hpp"
#include "invariance.hpp"
#include "io.hpp"
#include "priors.hpp"
#include "solver.hpp"
