#include "csft/config.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "csft/error.hpp"
#include "csft/kernel/kernels.hpp"

namespace csft {

namespace {

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

template <typename T>
T parse_number(const std::string& name, const std::string& text) {
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw ParameterError("config " + name + ": cannot parse '" + text + "'");
    }
    return v;
}

bool parse_bool(const std::string& name, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        return false;
    }
    throw ParameterError("config " + name + ": expected true or false, got '" + text + "'");
}

class Builder {
public:
    explicit Builder(std::vector<ConfigKey>& out) : out_(out) {}

    void section(std::string s) { section_ = std::move(s); }

    void size(const std::string& key, std::size_t& v) {
        const std::string name = section_ + "." + key;
        add(key, [&v] { return std::to_string(v); },
            [&v, name](const std::string& t) { v = parse_number<std::size_t>(name, t); });
    }
    void u64(const std::string& key, std::uint64_t& v) {
        const std::string name = section_ + "." + key;
        add(key, [&v] { return std::to_string(v); },
            [&v, name](const std::string& t) { v = parse_number<std::uint64_t>(name, t); });
    }
    void real(const std::string& key, double& v) {
        const std::string name = section_ + "." + key;
        add(key, [&v] { return fmt(v); }, [&v, name](const std::string& t) { v = parse_number<double>(name, t); });
    }
    void flag(const std::string& key, bool& v) {
        const std::string name = section_ + "." + key;
        add(key, [&v] { return std::string(v ? "true" : "false"); },
            [&v, name](const std::string& t) { v = parse_bool(name, t); });
    }
    // A recorded design choice with a single supported value.
    void fixed(const std::string& key, const std::string& value) {
        const std::string name = section_ + "." + key;
        add(key, [value] { return value; },
            [value, name](const std::string& t) {
                if (t != value) {
                    throw ParameterError("config " + name + ": only '" + value + "' is supported, got '" + t + "'");
                }
            });
    }
    void add(const std::string& key, std::function<std::string()> get, std::function<void(const std::string&)> set) {
        out_.push_back({section_, key, std::move(get), std::move(set)});
    }

private:
    std::vector<ConfigKey>& out_;
    std::string section_;
};

void optimizer_keys(Builder& b, AdamWConfig& o) {
    b.real("lr", o.lr);
    b.real("beta1", o.beta1);
    b.real("beta2", o.beta2);
    b.real("eps", o.eps);
    b.real("weight_decay", o.weight_decay);
    b.real("warmup_fraction", o.warmup_fraction);
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

} // namespace

std::vector<ConfigKey> config_keys(RunConfig& cfg) {
    std::vector<ConfigKey> keys;
    Builder b(keys);
    auto& t = cfg.train;

    b.section("run");
    b.u64("seed", t.seed);
    b.add("method", [&t] { return std::string(t.method == Method::Supervised ? "sup" : "semi"); },
          [&t](const std::string& v) { t.method = parse_method(v); });
    b.size("budget", cfg.budget);
    b.size("checkpoint_every", cfg.checkpoint_every);
    b.add("simd", [&cfg] { return cfg.simd; },
          [&cfg](const std::string& v) {
              if (v != "auto" && v != "scalar" && v != "avx2") {
                  throw ParameterError("config run.simd: expected auto, scalar or avx2, got '" + v + "'");
              }
              cfg.simd = v;
          });

    b.section("schedule");
    auto& s = t.schedule;
    b.size("warmstart_supervised_steps", s.warmstart_supervised_steps);
    b.size("supervised_per_unsupervised", s.supervised_per_unsupervised);
    b.size("phase_offset", s.phase_offset);
    b.size("total_steps", s.total_steps);
    b.size("batch_supervised", s.batch_supervised);
    b.size("batch_unsupervised", s.batch_unsupervised);
    b.size("eval_every", s.eval_every);
    b.size("patience", s.patience);
    b.flag("discriminator_first", s.discriminator_first);
    b.fixed("divergence_policy", "abort");

    b.section("optimizer");
    optimizer_keys(b, t.component_optimizer);
    b.section("discriminator_optimizer");
    optimizer_keys(b, t.discriminator_optimizer);

    b.section("objectives");
    b.real("lambda_c", t.weights.lambda_c);
    b.real("lambda_s", t.weights.lambda_s);
    b.real("lambda_y", t.weights.lambda_y);
    b.real("lambda_yhat", t.weights.lambda_yhat);
    b.fixed("generator_loss", "non-saturating");
    b.fixed("content_fake", "softmax");
    b.fixed("cls_fake", "prior-decode");
    b.fixed("discriminator_updates", "1");
    b.fixed("learnable_priors", "false");

    b.section("architecture");
    auto& a = t.architecture;
    b.real("width_scale", a.width_scale);
    b.size("style_dim", a.style_dim);
    b.real("head_slope", a.head_slope);
    b.real("cls_disc_slope", a.cls_disc_slope);
    b.real("dropout", a.dropout);
    b.flag("disc_inter_activations", a.disc_inter_activations);
    b.real("disc_inter_slope", a.disc_inter_slope);

    b.section("sweep");
    b.size("seeds", cfg.sweep_seeds);
    b.size("jobs", cfg.sweep_jobs);

    b.section("synthetic");
    auto& y = cfg.synthetic;
    b.size("classes", y.num_classes);
    b.size("dim", y.cls_dim);
    b.real("mean_scale", y.mean_scale);
    b.real("noise_scale", y.noise_scale);
    b.size("nuisance_dim", y.nuisance_dim);
    b.real("nuisance_scale", y.nuisance_scale);
    b.size("train_rows", y.train_rows);
    b.size("test_rows", y.test_rows);
    b.u64("seed", y.seed);
    return keys;
}

void set_config_value(RunConfig& cfg, const std::string& full_key, const std::string& value) {
    for (auto& k : config_keys(cfg)) {
        if (k.full_name() == full_key) {
            k.set(value);
            return;
        }
    }
    throw ParameterError("unknown config key '" + full_key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    std::map<std::string, ConfigKey> by_name;
    for (auto& k : config_keys(cfg)) {
        by_name.emplace(k.full_name(), k);
    }
    for (const auto& item : items) {
        // Section open/close markers.
        if (item.name == "++" || item.name == "--") {
            continue;
        }
        const std::string name = item.fullname();
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw ParameterError("unknown config key '" + name + "'");
        }
        if (item.inputs.size() != 1) {
            throw ParameterError("config " + name + ": expected exactly one value");
        }
        it->second.set(unquote(item.inputs.front()));
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    apply_config_text(cfg, text.str());
}

std::string render_config(const RunConfig& cfg) {
    RunConfig copy = cfg;
    std::string out;
    std::string section;
    for (const auto& k : config_keys(copy)) {
        if (k.section != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + k.section + "]\n";
            section = k.section;
        }
        out += k.key + " = " + k.get() + "\n";
    }
    return out;
}

void apply_simd(const std::string& simd) {
    if (simd == "scalar") {
        kernel::set_isa(kernel::Isa::Scalar);
    } else if (simd == "avx2") {
        kernel::set_isa(kernel::Isa::Avx2);
    } else if (simd != "auto") {
        throw ParameterError("unknown simd setting '" + simd + "'");
    }
}

} // namespace csft
