// config.hpp - Run configuration (flat key = value files) and CSV input/output

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nmsse/ensemble.hpp"
#include "nmsse/functionals.hpp"
#include "nmsse/kernel.hpp"
#include "nmsse/sse.hpp"

namespace nmsse {

enum class InitialState { excited, ground, plus };

struct RunConfig {
    std::string kernel{"0.25,1,0"}; // gamma = kappa = 1
    double delta{3.0};
    double chi{5.0};
    InitialState initial{InitialState::excited};
    Unravelling unravelling{Unravelling::coherent};
    int order{1};
    FunctionalMethod method{FunctionalMethod::perturbative};
    Variant variant{Variant::nonlinear};
    double dt{1e-3};
    Scheme scheme{Scheme::heun};
    double t_final{10.0};
    int record_stride{10};
    int noise_substeps{1};
    std::int64_t ntraj{1000};
    std::uint64_t seed{1};
    int nmax{kDefaultNmax};
    double enlarged_dt{1e-3};
    std::string output{"-"};

    MemoryKernel memory_kernel() const { return MemoryKernel::parse(kernel); }
    SystemModel model() const { return SystemModel::driven_tla(delta, chi); }
    StateKet initial_ket() const;
    ProviderSpec provider() const { return {method, unravelling, order}; }
    StepperConfig stepper() const;
    // Enlarged/Lindblad grid: enlarged_dt steps recording at the SSE record times.
    StepperConfig reference_stepper() const;
};

// Recognised keys, in file order of the documentation.
const std::vector<std::string>& config_keys();

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

// Reads `path` (empty: defaults only), applies overrides, validates.
// Throws ConfigError with the line number or key at fault.
RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides = {});
RunConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides = {});

// "%.11e" rows, LF endings. Path "-" writes to stdout. Throws IoError.
void emit_csv(const BlochSeries& series, const std::string& path);
void emit_comparison_csv(const ComparisonMetrics& metrics, const std::string& path);

std::string format_bloch_csv(const BlochSeries& series);
std::string format_comparison_csv(const ComparisonMetrics& metrics);

// Reads a file written by emit_csv. Throws IoError.
BlochSeries read_bloch_csv(const std::string& path);

} // namespace nmsse
