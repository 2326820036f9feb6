#pragma once

// Umbrella header.

#include <gencrit/densela.hpp>
#include <gencrit/exprdsl.hpp>
#include <gencrit/geometry.hpp>
#include <gencrit/gifamily.hpp>
#include <gencrit/paper_suite.hpp>
#include <gencrit/problem_io.hpp>
#include <gencrit/report.hpp>
#include <gencrit/stationarity.hpp>
#include <gencrit/types.hpp>
