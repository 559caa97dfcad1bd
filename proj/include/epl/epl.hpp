#pragma once

#include "epl/cli_runner.hpp"
#include "epl/finite_extremality.hpp"
#include "epl/geometry_properties.hpp"
#include "epl/infinite_extremality.hpp"
#include "epl/intersection_calculus.hpp"
#include "epl/normal_cones.hpp"
#include "epl/sip_optimality.hpp"
