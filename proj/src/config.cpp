#include "nmsse/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "nmsse/error.hpp"

namespace nmsse {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v, int line)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(out)) {
        throw ConfigError("invalid number '" + v + "' for key '" + key + "'", line, key);
    }
    return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v, int line)
{
    Int out{};
    const auto* end = v.data() + v.size();
    const auto res = std::from_chars(v.data(), end, out);
    if (v.empty() || res.ec != std::errc{} || res.ptr != end) {
        throw ConfigError("invalid integer '" + v + "' for key '" + key + "'", line, key);
    }
    return out;
}

[[noreturn]] void bad_choice(const std::string& key, const std::string& v, int line,
                             const std::string& allowed)
{
    throw ConfigError("invalid value '" + v + "' for key '" + key + "' (expected " + allowed + ")",
                      line, key);
}

void assign(RunConfig& c, const std::string& key, const std::string& v, int line)
{
    if (key == "kernel") {
        c.kernel = v;
    } else if (key == "delta") {
        c.delta = to_double(key, v, line);
    } else if (key == "chi") {
        c.chi = to_double(key, v, line);
    } else if (key == "initial") {
        if (v == "excited") c.initial = InitialState::excited;
        else if (v == "ground") c.initial = InitialState::ground;
        else if (v == "plus") c.initial = InitialState::plus;
        else bad_choice(key, v, line, "excited|ground|plus");
    } else if (key == "unravelling") {
        if (v == "coherent") c.unravelling = Unravelling::coherent;
        else if (v == "quadrature") c.unravelling = Unravelling::quadrature;
        else bad_choice(key, v, line, "coherent|quadrature");
    } else if (key == "order") {
        c.order = to_int<int>(key, v, line);
    } else if (key == "method") {
        if (v == "perturbative") c.method = FunctionalMethod::perturbative;
        else if (v == "ydgs") c.method = FunctionalMethod::ydgs;
        else bad_choice(key, v, line, "perturbative|ydgs");
    } else if (key == "variant") {
        if (v == "linear") c.variant = Variant::linear;
        else if (v == "nonlinear") c.variant = Variant::nonlinear;
        else bad_choice(key, v, line, "linear|nonlinear");
    } else if (key == "dt") {
        c.dt = to_double(key, v, line);
    } else if (key == "scheme") {
        if (v == "heun") c.scheme = Scheme::heun;
        else if (v == "rk4") c.scheme = Scheme::rk4;
        else bad_choice(key, v, line, "heun|rk4");
    } else if (key == "t_final") {
        c.t_final = to_double(key, v, line);
    } else if (key == "record_stride") {
        c.record_stride = to_int<int>(key, v, line);
    } else if (key == "noise_substeps") {
        c.noise_substeps = to_int<int>(key, v, line);
    } else if (key == "ntraj") {
        c.ntraj = to_int<std::int64_t>(key, v, line);
    } else if (key == "seed") {
        c.seed = to_int<std::uint64_t>(key, v, line);
    } else if (key == "nmax") {
        c.nmax = to_int<int>(key, v, line);
    } else if (key == "enlarged_dt") {
        c.enlarged_dt = to_double(key, v, line);
    } else if (key == "output") {
        c.output = v;
    } else {
        throw ConfigError("unknown key '" + key + "'", line, key);
    }
}

void require(bool ok, const std::string& key, const std::string& what)
{
    if (!ok) {
        throw ConfigError("'" + key + "' " + what, 0, key);
    }
}

void validate(const RunConfig& c)
{
    MemoryKernel kernel = [&] {
        try {
            return c.memory_kernel();
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("invalid kernel: ") + e.what(), 0, "kernel");
        }
    }();
    require(c.order >= 0, "order", "must be >= 0");
    if (c.method == FunctionalMethod::perturbative) {
        const int max_order =
            c.unravelling == Unravelling::coherent ? kMaxCoherentOrder : kMaxQuadratureOrder;
        require(c.order <= max_order, "order",
                "must be <= " + std::to_string(max_order) + " for the " +
                    std::string(to_string(c.unravelling)) + " unravelling");
    }
    require(c.unravelling == Unravelling::coherent || kernel.quadrature_ok(), "kernel",
            "must be real (mirror-paired detunings) for the quadrature unravelling");
    require(c.dt > 0.0, "dt", "must be > 0");
    require(c.t_final >= 0.0, "t_final", "must be >= 0");
    require(c.record_stride >= 1, "record_stride", "must be >= 1");
    require(c.noise_substeps >= 1, "noise_substeps", "must be >= 1");
    require(c.ntraj >= 1, "ntraj", "must be >= 1");
    require(c.nmax >= 1, "nmax", "must be >= 1");
    require(c.enlarged_dt > 0.0, "enlarged_dt", "must be > 0");
    require(std::abs(c.delta) < 1e6 && std::abs(c.chi) < 1e6, "delta", "out of range");
    try {
        validate_stepper(c.stepper());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what(), 0, "t_final");
    }
    try {
        validate_stepper(c.reference_stepper());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what(), 0, "enlarged_dt");
    }
}

} // namespace

StateKet RunConfig::initial_ket() const
{
    switch (initial) {
    case InitialState::ground:
        return tla::ground();
    case InitialState::plus:
        return (tla::excited() + tla::ground()) / std::sqrt(2.0);
    case InitialState::excited:
        break;
    }
    return tla::excited();
}

StepperConfig RunConfig::stepper() const
{
    StepperConfig s;
    s.dt = dt;
    s.scheme = scheme;
    s.t_final = t_final;
    s.record_stride = record_stride;
    s.noise_substeps = noise_substeps;
    return s;
}

StepperConfig RunConfig::reference_stepper() const
{
    StepperConfig s;
    s.dt = enlarged_dt;
    s.scheme = Scheme::rk4;
    s.t_final = t_final;
    const double ratio = dt * record_stride / enlarged_dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || ratio < 0.5) {
        throw ConfigError("record interval dt*record_stride must be a multiple of enlarged_dt", 0,
                          "enlarged_dt");
    }
    s.record_stride = static_cast<int>(std::lround(ratio));
    return s;
}

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys{
        "kernel", "delta", "chi", "initial", "unravelling", "order", "method", "variant", "dt",
        "scheme", "t_final", "record_stride", "noise_substeps", "ntraj", "seed", "nmax",
        "enlarged_dt", "output"};
    return keys;
}

RunConfig parse_config_text(const std::string& text, const ConfigOverrides& overrides)
{
    RunConfig c;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'", line);
        }
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(line) + ": missing key", line);
        }
        if (seen.count(key)) {
            throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key +
                                  "' (first on line " + std::to_string(seen[key]) + ")",
                              line, key);
        }
        seen[key] = line;
        try {
            assign(c, key, value, line);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line) + ": " + e.what(), line, e.key());
        }
    }
    for (const auto& [key, value] : overrides) {
        assign(c, key, trim(value), 0);
    }
    validate(c);
    return c;
}

RunConfig parse_config(const std::string& path, const ConfigOverrides& overrides)
{
    if (path.empty()) {
        return parse_config_text("", overrides);
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), overrides);
}

namespace {

void append_row(std::string& out, std::initializer_list<double> values)
{
    char buf[32];
    bool first = true;
    for (double v : values) {
        if (!first) {
            out += ',';
        }
        first = false;
        std::snprintf(buf, sizeof buf, "%.11e", v);
        out += buf;
    }
    out += '\n';
}

void write_text(const std::string& text, const std::string& path)
{
    if (path == "-") {
        std::cout << text << std::flush;
        if (!std::cout) {
            throw IoError("cannot write to stdout");
        }
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    f << text;
    f.flush();
    if (!f) {
        throw IoError("write to '" + path + "' failed");
    }
}

} // namespace

std::string format_bloch_csv(const BlochSeries& series)
{
    std::string out = "t,x,y,z,sx,sy,sz\n";
    for (std::size_t i = 0; i < series.t.size(); ++i) {
        const BlochVector& m = series.mean[i];
        const BlochVector e = i < series.stderr_.size() ? series.stderr_[i] : BlochVector{};
        append_row(out, {series.t[i], m.x, m.y, m.z, e.x, e.y, e.z});
    }
    return out;
}

std::string format_comparison_csv(const ComparisonMetrics& metrics)
{
    std::string out = "t,dx,dy,dz\n";
    for (std::size_t i = 0; i < metrics.t.size(); ++i) {
        const BlochVector& d = metrics.diff[i];
        append_row(out, {metrics.t[i], d.x, d.y, d.z});
    }
    return out;
}

void emit_csv(const BlochSeries& series, const std::string& path)
{
    write_text(format_bloch_csv(series), path);
}

void emit_comparison_csv(const ComparisonMetrics& metrics, const std::string& path)
{
    write_text(format_comparison_csv(metrics), path);
}

BlochSeries read_bloch_csv(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(f, line) || trim(line) != "t,x,y,z,sx,sy,sz") {
        throw IoError("'" + path + "': missing header t,x,y,z,sx,sy,sz");
    }
    BlochSeries out;
    int row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(cell, &used));
                if (used != cell.size()) {
                    throw std::invalid_argument(cell);
                }
            } catch (const std::exception&) {
                throw IoError("'" + path + "' line " + std::to_string(row) + ": bad number");
            }
        }
        if (v.size() != 7) {
            throw IoError("'" + path + "' line " + std::to_string(row) + ": expected 7 columns");
        }
        out.t.push_back(v[0]);
        out.mean.push_back({v[1], v[2], v[3]});
        out.stderr_.push_back({v[4], v[5], v[6]});
    }
    return out;
}

} // namespace nmsse
