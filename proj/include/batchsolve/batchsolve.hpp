#pragma once

#include "batchsolve/base.hpp"
#include "batchsolve/batch_blas.hpp"
#include "batchsolve/batch_formats.hpp"
#include "batchsolve/dispatch_tuning.hpp"
#include "batchsolve/parallel.hpp"
#include "batchsolve/preconditioners.hpp"
#include "batchsolve/solvers.hpp"
