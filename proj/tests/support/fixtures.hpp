#pragma once

// Random data sets and points shared by the model tests and the acceptance run.

#include <random>
#include <span>
#include <vector>

#include "threshold/frisk_model.hpp"
#include "threshold/stop_model.hpp"

namespace fixture {

std::vector<double> random_point(std::size_t n, std::mt19937_64& rng, double radius = 1.5);
/// Cells with up to 400 stops and uniformly drawn search and hit counts.
threshold::FriskData random_frisk_data(std::size_t races, std::size_t locations, std::mt19937_64& rng);
/// Up to 300 stops per (race, location) and census shares in [0.05, 1).
threshold::StopData random_stop_data(std::size_t races, std::size_t locations, std::mt19937_64& rng);

/// Largest componentwise relative error between the analytic gradient and
/// extrapolated finite differences, skipping components below 1e-8 in magnitude.
double worst_gradient_error(const threshold::LogDensity& model, std::span<const double> q);

}  // namespace fixture
