#pragma once

#include "mfcurv/config.hpp"
#include "mfcurv/errors.hpp"
#include "mfcurv/simplex.hpp"
#include "mfcurv/logmean.hpp"
#include "mfcurv/polynomial.hpp"
#include "mfcurv/random.hpp"
#include "mfcurv/parallel.hpp"
#include "mfcurv/models.hpp"
#include "mfcurv/model_spec.hpp"
#include "mfcurv/optim.hpp"
#include "mfcurv/dynamics.hpp"
#include "mfcurv/metric.hpp"
#include "mfcurv/curvature.hpp"
#include "mfcurv/inequalities.hpp"
