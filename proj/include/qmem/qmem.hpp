#pragma once

#include "qmem/config.hpp"
#include "qmem/config_io.hpp"
#include "qmem/core_model.hpp"
#include "qmem/errors.hpp"
#include "qmem/matching.hpp"
#include "qmem/parallel.hpp"
#include "qmem/polynomial.hpp"
#include "qmem/special_functions.hpp"
#include "qmem/table.hpp"
#include "qmem/time_domain.hpp"
#include "qmem/topology.hpp"
