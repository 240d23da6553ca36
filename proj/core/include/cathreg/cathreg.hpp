#pragma once

#include "cathreg/dtw.hpp"
#include "cathreg/error.hpp"
#include "cathreg/evaluation.hpp"
#include "cathreg/geometry.hpp"
#include "cathreg/path_io.hpp"
#include "cathreg/registration.hpp"
#include "cathreg/report.hpp"
#include "cathreg/simulation.hpp"
