#include "fieldmeta/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fieldmeta::config {

namespace {

std::string join(const std::vector<std::string>& lines) {
    std::string out = "invalid configuration:";
    for (const auto& l : lines) out += "\n  " + l;
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double to_double(const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) throw std::invalid_argument("expected a number");
    return d;
}

long long to_integer(const std::string& v) {
    errno = 0;
    char* end = nullptr;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) throw std::invalid_argument("expected an integer");
    return n;
}

int to_int(const std::string& v) {
    const long long n = to_integer(v);
    if (n < -2147483647LL || n > 2147483647LL) throw std::invalid_argument("integer out of range");
    return static_cast<int>(n);
}

int to_positive(const std::string& v) {
    const int n = to_int(v);
    if (n < 1) throw std::invalid_argument("must be positive");
    return n;
}

int to_non_negative(const std::string& v) {
    const int n = to_int(v);
    if (n < 0) throw std::invalid_argument("must be non-negative");
    return n;
}

bool to_bool(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw std::invalid_argument("expected true or false");
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"dataset", [](TrainConfig& c, const std::string& v) { c.dataset = v; }},
        {"output_dir", [](TrainConfig& c, const std::string& v) { c.output_dir = v; }},
        {"preset", [](TrainConfig&, const std::string&) {}},
        {"hidden_dim", [](TrainConfig& c, const std::string& v) { c.model.hidden_dim = to_positive(v); }},
        {"depth", [](TrainConfig& c, const std::string& v) { c.model.depth = to_positive(v); }},
        {"activation", [](TrainConfig& c, const std::string& v) { c.model.activation = nf::parse_activation(v); }},
        {"omega0",
         [](TrainConfig& c, const std::string& v) {
             c.model.omega0 = to_double(v);
             if (!(c.model.omega0 > 0.0)) throw std::invalid_argument("must be positive");
         }},
        {"ff_sigma",
         [](TrainConfig& c, const std::string& v) {
             c.model.ff_sigma = to_double(v);
             if (!(c.model.ff_sigma > 0.0)) throw std::invalid_argument("must be positive");
         }},
        {"ff_features", [](TrainConfig& c, const std::string& v) { c.model.ff_features = to_positive(v); }},
        {"head", [](TrainConfig& c, const std::string& v) { c.model.head = nf::parse_head(v); }},
        {"bias", [](TrainConfig& c, const std::string& v) { c.model.bias = to_bool(v); }},
        {"inner_steps", [](TrainConfig& c, const std::string& v) { c.hyper.inner_steps = to_positive(v); }},
        {"bootstrap_steps", [](TrainConfig& c, const std::string& v) { c.hyper.bootstrap_steps = to_non_negative(v); }},
        {"gamma",
         [](TrainConfig& c, const std::string& v) {
             c.hyper.gamma = to_double(v);
             if (!(c.hyper.gamma > 0.0 && c.hyper.gamma <= 1.0)) {
                 throw std::invalid_argument("must lie in (0, 1], got " + v);
             }
         }},
        {"lambda",
         [](TrainConfig& c, const std::string& v) {
             c.hyper.lambda = to_double(v);
             if (!(c.hyper.lambda >= 0.0)) throw std::invalid_argument("must be non-negative");
         }},
        {"meta_lr",
         [](TrainConfig& c, const std::string& v) {
             c.hyper.meta_lr = to_double(v);
             if (!(c.hyper.meta_lr >= 0.0)) throw std::invalid_argument("must be non-negative");
         }},
        {"alpha_init",
         [](TrainConfig& c, const std::string& v) {
             c.alpha_init = to_double(v);
             if (!(c.alpha_init > 0.0)) throw std::invalid_argument("must be positive");
         }},
        {"outer_steps", [](TrainConfig& c, const std::string& v) { c.outer_steps = to_non_negative(v); }},
        {"batch_size", [](TrainConfig& c, const std::string& v) { c.batch_size = to_positive(v); }},
        {"scorer", [](TrainConfig& c, const std::string& v) { c.scorer = scoring::parse_scorer(v); }},
        {"first_order", [](TrainConfig& c, const std::string& v) { c.first_order = to_bool(v); }},
        {"checkpoint_every", [](TrainConfig& c, const std::string& v) { c.checkpoint_every = to_positive(v); }},
        {"seed",
         [](TrainConfig& c, const std::string& v) {
             if (!v.empty() && v.front() == '-') throw std::invalid_argument("must be non-negative");
             errno = 0;
             char* end = nullptr;
             const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
             if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE) throw std::invalid_argument("expected an integer");
             c.seed = n;
         }},
        {"jobs", [](TrainConfig& c, const std::string& v) { c.jobs = to_positive(v); }},
    };
    return table;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}

void apply_preset(TrainConfig& cfg, std::string_view preset) {
    if (preset == "paper") {
        cfg.model = nf::ModelSpec{};
        cfg.hyper = meta::Hyper{};
        cfg.alpha_init = 1e-2;
        cfg.outer_steps = 150000;
        cfg.batch_size = 4;
        cfg.checkpoint_every = 1000;
    } else if (preset == "desk") {
        cfg.model = nf::ModelSpec{};
        cfg.model.hidden_dim = 64;
        cfg.model.depth = 3;
        cfg.hyper = meta::Hyper{};
        cfg.hyper.inner_steps = 8;
        cfg.hyper.meta_lr = 1e-4;
        cfg.alpha_init = 1e-2;
        cfg.outer_steps = 300;
        cfg.batch_size = 4;
        cfg.checkpoint_every = 100;
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(preset) + "' (paper or desk)");
    }
    cfg.preset = std::string(preset);
}

TrainConfig parse_config(std::string_view text) {
    std::vector<std::string> problems;
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            problems.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
            continue;
        }
        const std::string key(trim(line.substr(0, eq)));
        std::string_view value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        if (key.empty()) {
            problems.push_back("line " + std::to_string(line_no) + ": missing key");
            continue;
        }
        if (!setters().contains(key)) {
            problems.push_back(key + ": unknown key (line " + std::to_string(line_no) + ")");
            continue;
        }
        const bool repeated = std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == key; });
        if (repeated) {
            problems.push_back(key + ": repeated (line " + std::to_string(line_no) + ")");
            continue;
        }
        entries.emplace_back(key, std::string(value));
    }

    TrainConfig cfg;
    apply_preset(cfg, "paper");
    for (const auto& [key, value] : entries) {
        if (key != "preset") continue;
        try {
            apply_preset(cfg, value);
        } catch (const std::exception& e) {
            problems.push_back("preset: " + std::string(e.what()));
        }
    }
    for (const auto& [key, value] : entries) {
        try {
            setters().find(key)->second(cfg, value);
        } catch (const std::exception& e) {
            problems.push_back(key + ": " + e.what());
        }
    }
    for (const char* required : {"dataset", "output_dir"}) {
        const bool present =
            std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == required; });
        if (!present) problems.push_back(std::string(required) + ": required key is missing");
    }
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    TrainConfig cfg = parse_config(text.str());
    // Relative paths are taken relative to the config file.
    const auto base = path.parent_path();
    if (cfg.dataset.is_relative()) cfg.dataset = base / cfg.dataset;
    if (cfg.output_dir.is_relative()) cfg.output_dir = base / cfg.output_dir;
    return cfg;
}

std::vector<std::string_view> known_keys() {
    std::vector<std::string_view> out;
    for (const auto& [key, setter] : setters()) out.push_back(key);
    return out;
}

}  // namespace fieldmeta::config
