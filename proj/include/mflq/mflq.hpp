#pragma once

#include "mflq/check_riccati.hpp"
#include "mflq/error.hpp"
#include "mflq/finite_riccati.hpp"
#include "mflq/full_oracle.hpp"
#include "mflq/gains.hpp"
#include "mflq/io.hpp"
#include "mflq/limit_riccati.hpp"
#include "mflq/mfg.hpp"
#include "mflq/model.hpp"
#include "mflq/ode.hpp"
#include "mflq/portfolio.hpp"
#include "mflq/simulate.hpp"
