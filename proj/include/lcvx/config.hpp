#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcvx/conditions.hpp"
#include "lcvx/conic.hpp"
#include "lcvx/error.hpp"
#include "lcvx/solver.hpp"
#include "lcvx/transcription.hpp"

namespace lcvx
{

/// Malformed configuration; `path` names the offending field, e.g. "/inputs/cones/3/ray".
class ConfigError : public InvalidInput
{
public:
    ConfigError(std::string path, const std::string& message)
        : InvalidInput(path + ": " + message), path_(std::move(path))
    {
    }
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

inline constexpr int kSchemaVersion = 1;

/// Parsed problem file. The problem is stored in SI units; the remaining fields keep
/// enough of the original form to write the file back out.
struct ProblemConfig
{
    int schema_version{kSchemaVersion};
    ProblemSpec spec;

    /// "explicit" or "rotating-station".
    std::string dynamics_model{"explicit"};
    Eigen::Vector3d omega{Eigen::Vector3d::Zero()};  ///< rad/s

    /// Fixed terminal components (nullopt = free); empty when the raw boundary map was given.
    std::vector<std::optional<double>> terminal_state;
    std::optional<double> final_time;

    int N{100};
    std::optional<double> tf;
    double t_lo{0.0};
    double t_hi{0.0};
    double tol_t{1e-2};

    SolverOptions solver{};
    VerifyTolerances verify{};
    ConditionOptions conditions{};

    bool has_bracket() const { return t_hi > t_lo && t_lo > 0.0; }
};

/// Throws ConfigError with the failing field path.
ProblemConfig parse_config(const std::string& json_text);
ProblemConfig load_config(const std::string& path);

/// Schema-conforming JSON, 17 significant digits for every real.
std::string dump_config(const ProblemConfig& cfg);

/// Twelve thruster directions: +z tilted by `up_deg` about +x, -x, +y, -y; -z tilted by
/// `down_deg` about the same axes; then +x, -x, +y, -y.
std::vector<Eigen::Vector3d> docking_directions(double up_deg = 40.0, double down_deg = 30.0);

/// Rotating-station docking scenario at N = 300 with a minimum-time search.
ProblemConfig docking_preset();

inline constexpr double kRpm = 3.14159265358979323846 / 30.0;

}  // namespace lcvx
