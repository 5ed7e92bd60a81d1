#pragma once

#include "ddde/checkpoint.hpp"
#include "ddde/data.hpp"
#include "ddde/dv_estimator.hpp"
#include "ddde/errors.hpp"
#include "ddde/evaluation.hpp"
#include "ddde/io.hpp"
#include "ddde/kde.hpp"
#include "ddde/nn.hpp"
#include "ddde/rng.hpp"
#include "ddde/run_config.hpp"
