#pragma once

#include "fadeflow/models.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fadeflow {

/// A config problem, located in the source file when possible (1-based).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& file, int line, int column, const std::string& what);

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// An initial datum or inversion target on the model grid.
struct DatumSpec {
    enum class Kind { Constant, Samples, Sinusoid, Random, File };
    Kind kind = Kind::Constant;
    std::vector<double> value;                 ///< constant; sinusoid offset
    std::vector<std::vector<double>> samples;  ///< newest first, one row per grid step
    std::vector<double> amplitude;             ///< sinusoid
    double frequency = 1.0;
    double phase = 0.0;
    double random_amplitude = 1.0;
    std::string path;  ///< CSV with columns s, x_1..x_m
};

HistoryFunction build_datum(const DatumSpec& spec, std::size_t dim, const Grid& grid, std::uint64_t seed);

struct RunSection {
    std::vector<double> theta0;
    double T = 10.0;
    DatumSpec initial;
    std::optional<DatumSpec> initial_y;  ///< second datum for omega / monotonicity
    std::uint64_t seed = 1;
    std::size_t output_every = 1;
};

struct InvertSection {
    DatumSpec h;
    double tol_fix = 1e-10;
    int max_iter = 200;
    double residual_tol = 1e-8;
};

struct SweepSection {
    std::string parameter;  ///< key inside the model section, e.g. "alpha" or "inflow.0"
    std::vector<double> values;
};

struct RunConfig {
    std::string source_name;
    std::string source_text;
    std::string family;
    std::variant<FdeModel, NfdeModel> model;
    RunSection run;
    AuditOptions audit;
    OmegaOptions omega;
    InvertSection invert;
    std::optional<SweepSection> sweep;

    bool is_neutral() const { return std::holds_alternative<NfdeModel>(model); }
    std::size_t dim() const;
    const TorusBase& base() const;
    const Grid& grid() const;
};

/// Command-line overrides applied on top of the file.
struct ConfigOverrides {
    std::optional<double> step;
    std::optional<double> depth;
    std::optional<std::uint64_t> seed;
};

RunConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});
RunConfig parse_config(const std::string& text, const std::string& source_name,
                       const ConfigOverrides& overrides = {});

/// The config with model.<parameter> replaced by `value`.
RunConfig with_model_parameter(const RunConfig& cfg, const std::string& parameter, double value,
                               const ConfigOverrides& overrides = {});

}  // namespace fadeflow
