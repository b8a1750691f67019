#pragma once

// Umbrella header: the whole library in one include.

#include "mdsim/cli.hpp"
#include "mdsim/coefficients.hpp"
#include "mdsim/config.hpp"
#include "mdsim/coupling.hpp"
#include "mdsim/errors.hpp"
#include "mdsim/field.hpp"
#include "mdsim/grid.hpp"
#include "mdsim/linsolve.hpp"
#include "mdsim/mms.hpp"
#include "mdsim/operators.hpp"
#include "mdsim/pressure.hpp"
#include "mdsim/regularity.hpp"
#include "mdsim/snapshot.hpp"
#include "mdsim/transport.hpp"
