#pragma once

#include "dbt/boltzmann.hpp"
#include "dbt/config.hpp"
#include "dbt/constants.hpp"
#include "dbt/error.hpp"
#include "dbt/extrapolation.hpp"
#include "dbt/faddeeva.hpp"
#include "dbt/fitter.hpp"
#include "dbt/io.hpp"
#include "dbt/lineshape.hpp"
#include "dbt/pipeline.hpp"
#include "dbt/simulator.hpp"
#include "dbt/spectrum.hpp"
