#pragma once

#include "icelab/analysis/ancova.hpp"
#include "icelab/analysis/study.hpp"
#include "icelab/core/model.hpp"
#include "icelab/core/observed.hpp"
#include "icelab/mi/engine.hpp"
#include "icelab/mi/imputed.hpp"
#include "icelab/mi/pool.hpp"
#include "icelab/oracle/oracle.hpp"
#include "icelab/plan/default_plan.hpp"
#include "icelab/plan/parser.hpp"
#include "icelab/plan/resolve.hpp"
#include "icelab/plan/validate.hpp"
#include "icelab/sim/scenario.hpp"
#include "icelab/sim/scenario_yaml.hpp"
#include "icelab/sim/simulator.hpp"
