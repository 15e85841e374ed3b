#pragma once

#include "gpbounds/acquisition.hpp"
#include "gpbounds/baselines.hpp"
#include "gpbounds/bound_solver.hpp"
#include "gpbounds/config.hpp"
#include "gpbounds/design.hpp"
#include "gpbounds/errors.hpp"
#include "gpbounds/eval_cache.hpp"
#include "gpbounds/gp_core.hpp"
#include "gpbounds/low_discrepancy.hpp"
#include "gpbounds/models.hpp"
#include "gpbounds/report_io.hpp"
#include "gpbounds/subprocess.hpp"
