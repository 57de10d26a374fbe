#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace marketlab {

namespace constants {
/// Euler-Mascheroni constant, 15+ significant digits.
inline constexpr double gamma_e = 0.577215664901532861;

/// Entropy-maximizing reference level 2*exp(gamma_e - 1).
inline double reference_level() { return 2.0 * std::exp(gamma_e - 1.0); }
} // namespace constants

/// Global model constants for a basis market: n driving Brownian motions,
/// per-component activities (growth rates of the denominated benchmark),
/// reference level of the normalized benchmark, calendar grid and seed.
struct ModelParams {
    int n = 1;
    double gamma_e = constants::gamma_e;
    double y_bar = 0.0;
    std::vector<double> activities;
    double horizon = 10.0;
    double dt = 1.0 / 252.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1) throw std::invalid_argument("ModelParams: n must be >= 1");
        if (!(dt > 0.0)) throw std::invalid_argument("ModelParams: dt must be > 0");
        if (!(horizon >= dt)) throw std::invalid_argument("ModelParams: horizon must be >= dt");
        if (!(y_bar > 0.0)) throw std::invalid_argument("ModelParams: y_bar must be > 0");
        if (static_cast<int>(activities.size()) != n)
            throw std::invalid_argument("ModelParams: activities size must equal n");
        for (double a : activities)
            if (!(a >= 0.0) || !std::isfinite(a))
                throw std::invalid_argument("ModelParams: activities must be nonnegative finite");
    }

    bool entropy_maximizing_mode() const {
        return std::fabs(y_bar - 2.0 * std::exp(gamma_e - 1.0)) <= 1e-12 * y_bar;
    }

    std::size_t steps() const {
        return static_cast<std::size_t>(std::llround(horizon / dt));
    }

    /// Desk-scale constructor with y_bar pinned at 2*exp(gamma_e - 1).
    static ModelParams entropy_maximizing(int n, double activity,
                                          double horizon = 10.0, double dt = 1.0 / 252.0,
                                          std::uint64_t seed = 0) {
        ModelParams p;
        p.n = n;
        p.y_bar = constants::reference_level();
        p.activities.assign(static_cast<std::size_t>(n), activity);
        p.horizon = horizon;
        p.dt = dt;
        p.seed = seed;
        p.validate();
        return p;
    }

    static ModelParams from_json(const nlohmann::json& j) {
        ModelParams p;
        p.n = j.at("n").get<int>();
        p.gamma_e = j.value("gamma_e", constants::gamma_e);
        if (j.contains("y_bar")) {
            p.y_bar = j.at("y_bar").get<double>();
        } else {
            p.y_bar = 2.0 * std::exp(p.gamma_e - 1.0);
        }
        if (j.contains("activities")) {
            p.activities = j.at("activities").get<std::vector<double>>();
        } else if (j.contains("activity")) {
            p.activities.assign(static_cast<std::size_t>(p.n), j.at("activity").get<double>());
        } else {
            throw std::invalid_argument("ModelParams: need activities or activity");
        }
        p.horizon = j.value("horizon", 10.0);
        p.dt = j.value("dt", 1.0 / 252.0);
        p.seed = j.value("seed", std::uint64_t{0});
        p.validate();
        return p;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"n", n},
                              {"gamma_e", gamma_e},
                              {"y_bar", y_bar},
                              {"activities", activities},
                              {"horizon", horizon},
                              {"dt", dt},
                              {"seed", seed}};
    }
};

} // namespace marketlab
