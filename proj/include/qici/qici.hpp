#pragma once

#include "qici/linalg.hpp"
#include "qici/quatcore.hpp"
#include "qici/fusion.hpp"
#include "qici/state.hpp"
#include "qici/models.hpp"
#include "qici/estimator.hpp"
#include "qici/random.hpp"
#include "qici/simnet.hpp"
#include "qici/metrics.hpp"
#include "qici/config.hpp"
#include "qici/report.hpp"
