#pragma once

// Flat key = value configuration with a [model] section and per-scheme
// sections. Unknown sections and keys are hard errors.
//
//   [model]            model, X0, T, dt | n, a_lo, a_hi, control_grid, K_lo, K_hi,
//                      K1, K2, b, z_bound, terminal, terminal_value, c0, c_y, c_z
//   [fd]               dx, x_sd, m_ratio, m_sd
//   [pde]              dx, x_sd, m_ratio, m_sd, order (hjb_then_advection | strang)
//   [proba]            paths, seed, degree
//   [tree]             mode (explicit | implicit), m_rule (left | trapezoidal)
//   [sweep]            dt_list, schemes, seeds, output, plot_data

#include "bsde2/core.hpp"
#include "bsde2/fd_solver.hpp"
#include "bsde2/models.hpp"
#include "bsde2/pde_benchmark.hpp"
#include "bsde2/proba_solver.hpp"
#include "bsde2/tree_dp.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace bsde2 {

struct TreeConfig {
    TreeMode mode = TreeMode::Explicit;
    MIntegration m_rule = MIntegration::LeftEndpoint;
};

struct SweepSpec {
    std::vector<double> dt_list;
    std::vector<Scheme> schemes;
    std::vector<std::uint64_t> seeds;
    std::string output;
    std::string plot_data;
};

struct RunConfig {
    ModelConfig model;
    std::optional<double> dt;
    std::optional<std::size_t> n;
    LatticeConfig fd;
    PdeLatticeConfig pde;
    ProbaConfig proba;
    TreeConfig tree;
    SweepSpec sweep;

    /// Time grid from dt or n; defaults to dt = 0.01.
    TimeGrid time_grid() const {
        if (dt && n) throw Error(ErrorKind::Config, "set either dt or n, not both");
        if (n) return TimeGrid(model.horizon, *n);
        return TimeGrid::from_step(model.horizon, dt.value_or(0.01));
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw Error(ErrorKind::Config, "key '" + key + "': '" + v + "' is not a finite number");
    }
    return out;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const char* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorKind::Config, "key '" + key + "': '" + v + "' is not a nonnegative integer");
    }
    return out;
}

inline Scheme parse_scheme(const std::string& s) {
    if (s == "fd") return Scheme::FiniteDifference;
    if (s == "proba") return Scheme::Probabilistic;
    if (s == "pde") return Scheme::PdeSplitting;
    if (s == "tree") return Scheme::TreeDP;
    throw Error(ErrorKind::Config, "unknown scheme '" + s + "' (expected fd, proba, pde or tree)");
}

template <typename Lattice>
bool apply_lattice_key(Lattice& l, const std::string& key, const std::string& v) {
    if (key == "dx") l.dx = parse_real(key, v);
    else if (key == "x_sd") l.x_sd = parse_real(key, v);
    else if (key == "m_ratio") l.m_ratio = parse_real(key, v);
    else if (key == "m_sd") l.m_sd = parse_real(key, v);
    else return false;
    return true;
}

inline void apply_key(RunConfig& c, const std::string& section, const std::string& key, const std::string& v) {
    const auto real = [&] { return parse_real(key, v); };
    bool known = true;
    if (section == "model") {
        ModelConfig& m = c.model;
        if (key == "model") m.model = parse_model_id(v);
        else if (key == "X0") m.x0 = real();
        else if (key == "T") m.horizon = real();
        else if (key == "dt") c.dt = real();
        else if (key == "n") c.n = parse_unsigned(key, v);
        else if (key == "a_lo") m.a_lo = real();
        else if (key == "a_hi") m.a_hi = real();
        else if (key == "control_grid") m.control_grid = parse_unsigned(key, v);
        else if (key == "K_lo") m.k_lo = real();
        else if (key == "K_hi") m.k_hi = real();
        else if (key == "K1") m.k1 = real();
        else if (key == "K2") m.k2 = real();
        else if (key == "b") m.b = real();
        else if (key == "z_bound") m.z_bound = real();
        else if (key == "terminal") m.terminal = parse_terminal_kind(v);
        else if (key == "terminal_value") m.terminal_value = real();
        else if (key == "c0") m.c0 = real();
        else if (key == "c_y") m.c_y = real();
        else if (key == "c_z") m.c_z = real();
        else known = false;
    } else if (section == "fd") {
        known = apply_lattice_key(c.fd, key, v);
    } else if (section == "pde") {
        if (key == "order") {
            if (v == "hjb_then_advection") c.pde.order = SplitOrder::HjbThenAdvection;
            else if (v == "strang") c.pde.order = SplitOrder::Strang;
            else throw Error(ErrorKind::Config, "order must be hjb_then_advection or strang");
        } else {
            known = apply_lattice_key(c.pde, key, v);
        }
    } else if (section == "proba") {
        if (key == "paths") c.proba.n_paths = parse_unsigned(key, v);
        else if (key == "seed") c.proba.seed = parse_unsigned(key, v);
        else if (key == "degree") c.proba.basis.degree = static_cast<int>(parse_unsigned(key, v));
        else known = false;
    } else if (section == "tree") {
        if (key == "mode") {
            if (v == "explicit") c.tree.mode = TreeMode::Explicit;
            else if (v == "implicit") c.tree.mode = TreeMode::Implicit;
            else throw Error(ErrorKind::Config, "mode must be explicit or implicit");
        } else if (key == "m_rule") {
            if (v == "left") c.tree.m_rule = MIntegration::LeftEndpoint;
            else if (v == "trapezoidal") c.tree.m_rule = MIntegration::Trapezoidal;
            else throw Error(ErrorKind::Config, "m_rule must be left or trapezoidal");
        } else {
            known = false;
        }
    } else if (section == "sweep") {
        if (key == "dt_list") {
            c.sweep.dt_list.clear();
            for (const auto& s : split_list(v)) c.sweep.dt_list.push_back(parse_real(key, s));
        } else if (key == "schemes") {
            c.sweep.schemes.clear();
            for (const auto& s : split_list(v)) c.sweep.schemes.push_back(parse_scheme(s));
        } else if (key == "seeds") {
            c.sweep.seeds.clear();
            for (const auto& s : split_list(v)) c.sweep.seeds.push_back(parse_unsigned(key, s));
        } else if (key == "output") {
            c.sweep.output = v;
        } else if (key == "plot_data") {
            c.sweep.plot_data = v;
        } else {
            known = false;
        }
    }
    if (!known) throw Error(ErrorKind::Config, "unknown key '" + key + "' in section [" + section + "]");
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
    RunConfig c;
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorKind::Config, where + "unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "fd" && section != "pde" && section != "proba" &&
                section != "tree" && section != "sweep") {
                throw Error(ErrorKind::Config, where + "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Config, where + "expected key = value");
        if (section.empty()) throw Error(ErrorKind::Config, where + "key outside of a section");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        try {
            detail::apply_key(c, section, key, value);
        } catch (const Error& e) {
            const std::string msg = e.what();
            throw Error(ErrorKind::Config, where + msg.substr(msg.find(": ") + 2));
        }
    }
    c.model.validate();
    return c;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file '" + path + "'");
    return parse_config(in);
}

}  // namespace bsde2
