#include "ffoptics/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ffoptics/common.hpp"

namespace ffo {

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::ebp2: return "ebp2";
        case Arch::ffa3: return "ffa3";
        case Arch::ffa2_optics: return "ffa2_optics";
    }
    return "?";
}

Arch parse_arch(const std::string& name) {
    if (name == "ebp2") return Arch::ebp2;
    if (name == "ffa3") return Arch::ffa3;
    if (name == "ffa2_optics" || name == "ffa2-optics") return Arch::ffa2_optics;
    throw ConfigError("unknown architecture '" + name + "'");
}

int ExperimentConfig::layer_count() const {
    switch (arch) {
        case Arch::ebp2: return 2;
        case Arch::ffa3: return 3;
        case Arch::ffa2_optics: return 2;
    }
    return 0;
}

std::vector<int> ExperimentConfig::effective_taps() const {
    if (!taps.empty()) return taps;
    std::vector<int> t;
    if (arch == Arch::ffa2_optics) {
        // post-optics representations: every hooked stage
        for (int i = 1; i <= layer_count(); ++i) t.push_back(i);
    } else {
        for (int i = 2; i <= layer_count(); ++i) t.push_back(i);
    }
    return t;
}

std::vector<double> ExperimentConfig::effective_alphas() const {
    if (!alpha_grid.empty()) return alpha_grid;
    std::vector<double> g;
    for (int i = 0; i < 13; ++i) g.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    return g;
}

namespace {

struct Field {
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double to_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value '" + s + "'");
    }
}

long to_long(const std::string& s) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("bad integer value '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ConfigError("bad seed value '" + s + "'");
    return v;
}

template <class T, class Parse>
std::string join_list(const std::vector<T>& v, Parse fmt) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt(v[i]);
    }
    return out;
}

template <class T>
std::vector<T> split_list(const std::string& s, T (*conv)(const std::string&)) {
    std::vector<T> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ','))
        if (!item.empty()) out.push_back(conv(item));
    return out;
}

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = {
        {"arch",
         {[](const ExperimentConfig& c) { return arch_name(c.arch); },
          [](ExperimentConfig& c, const std::string& v) { c.arch = parse_arch(v); }}},
        {"split_seed",
         {[](const ExperimentConfig& c) { return std::to_string(c.split_seed); },
          [](ExperimentConfig& c, const std::string& v) { c.split_seed = to_u64(v); }}},
        {"init_seed",
         {[](const ExperimentConfig& c) { return std::to_string(c.init_seed); },
          [](ExperimentConfig& c, const std::string& v) { c.init_seed = to_u64(v); }}},
        {"disorder_seed",
         {[](const ExperimentConfig& c) { return std::to_string(c.disorder_seed); },
          [](ExperimentConfig& c, const std::string& v) { c.disorder_seed = to_u64(v); }}},
        {"negatives_seed",
         {[](const ExperimentConfig& c) { return std::to_string(c.negatives_seed); },
          [](ExperimentConfig& c, const std::string& v) { c.negatives_seed = to_u64(v); }}},
        {"n_train",
         {[](const ExperimentConfig& c) { return std::to_string(c.n_train); },
          [](ExperimentConfig& c, const std::string& v) { c.n_train = int(to_long(v)); }}},
        {"n_val",
         {[](const ExperimentConfig& c) { return std::to_string(c.n_val); },
          [](ExperimentConfig& c, const std::string& v) { c.n_val = int(to_long(v)); }}},
        {"n_test",
         {[](const ExperimentConfig& c) { return std::to_string(c.n_test); },
          [](ExperimentConfig& c, const std::string& v) { c.n_test = int(to_long(v)); }}},
        {"theta",
         {[](const ExperimentConfig& c) { return fmt_double(c.theta); },
          [](ExperimentConfig& c, const std::string& v) { c.theta = to_double(v); }}},
        {"lr",
         {[](const ExperimentConfig& c) { return fmt_double(c.lr); },
          [](ExperimentConfig& c, const std::string& v) { c.lr = to_double(v); }}},
        {"batch",
         {[](const ExperimentConfig& c) { return std::to_string(c.batch); },
          [](ExperimentConfig& c, const std::string& v) { c.batch = int(to_long(v)); }}},
        {"epochs",
         {[](const ExperimentConfig& c) { return std::to_string(c.epochs); },
          [](ExperimentConfig& c, const std::string& v) { c.epochs = int(to_long(v)); }}},
        {"dilation",
         {[](const ExperimentConfig& c) { return std::to_string(c.dilation); },
          [](ExperimentConfig& c, const std::string& v) { c.dilation = int(to_long(v)); }}},
        {"optics_modes",
         {[](const ExperimentConfig& c) { return std::to_string(c.optics_modes); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_modes = int(to_long(v)); }}},
        {"optics_grid",
         {[](const ExperimentConfig& c) { return std::to_string(c.optics_grid); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_grid = int(to_long(v)); }}},
        {"optics_dz",
         {[](const ExperimentConfig& c) { return fmt_double(c.optics_dz); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_dz = to_double(v); }}},
        {"optics_gamma_knob",
         {[](const ExperimentConfig& c) { return fmt_double(c.optics_gamma_knob); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_gamma_knob = to_double(v); }}},
        {"optics_power",
         {[](const ExperimentConfig& c) { return fmt_double(c.optics_power); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_power = to_double(v); }}},
        {"optics_waist",
         {[](const ExperimentConfig& c) { return fmt_double(c.optics_waist); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_waist = to_double(v); }}},
        {"optics_coupling",
         {[](const ExperimentConfig& c) { return fmt_double(c.optics_coupling); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_coupling = to_double(v); }}},
        {"optics_prune",
         {[](const ExperimentConfig& c) { return fmt_double(c.optics_prune); },
          [](ExperimentConfig& c, const std::string& v) { c.optics_prune = to_double(v); }}},
        {"optics_hook",
         {[](const ExperimentConfig& c) {
              return c.optics_hook == HookKind::fiber ? "fiber" : "identity";
          },
          [](ExperimentConfig& c, const std::string& v) {
              if (v == "fiber")
                  c.optics_hook = HookKind::fiber;
              else if (v == "identity")
                  c.optics_hook = HookKind::identity;
              else
                  throw ConfigError("unknown hook '" + v + "'");
          }}},
        {"alphas",
         {[](const ExperimentConfig& c) { return join_list(c.alpha_grid, fmt_double); },
          [](ExperimentConfig& c, const std::string& v) {
              c.alpha_grid = split_list<double>(v, +[](const std::string& s) { return to_double(s); });
          }}},
        {"taps",
         {[](const ExperimentConfig& c) {
              return join_list(c.taps, [](int t) { return std::to_string(t); });
          },
          [](ExperimentConfig& c, const std::string& v) {
              c.taps = split_list<int>(v, +[](const std::string& s) { return int(to_long(s)); });
              for (int t : c.taps)
                  if (t < 1) throw ConfigError("tap indices start at stage 1");
          }}},
        {"mnist_dir",
         {[](const ExperimentConfig& c) { return c.mnist_dir; },
          [](ExperimentConfig& c, const std::string& v) { c.mnist_dir = v; }}},
    };
    return table;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return parse_config_text(os.str());
}

std::string config_text(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& [k, f] : fields()) out += k + " = " + f.get(cfg) + "\n";
    return out;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : config_text(cfg)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace ffo
