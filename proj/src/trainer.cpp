#include "csft/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "csft/error.hpp"
#include "csft/evaluator.hpp"

namespace csft {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

const char* phase_name(Phase p) noexcept {
    return p == Phase::Supervised ? "supervised" : "unsupervised";
}

const char* method_name(Method m) noexcept {
    return m == Method::Supervised ? "supervised" : "semi-supervised";
}

Method parse_method(const std::string& text) {
    if (text == "sup" || text == "supervised") {
        return Method::Supervised;
    }
    if (text == "semi" || text == "semi-supervised") {
        return Method::SemiSupervised;
    }
    throw ParameterError("unknown method '" + text + "' (expected sup or semi)");
}

void TrainingSchedule::validate() const {
    if (supervised_per_unsupervised < 1) {
        throw ParameterError("schedule: supervised_per_unsupervised must be at least 1");
    }
    if (batch_supervised == 0 || batch_unsupervised == 0) {
        throw ParameterError("schedule: batch sizes must be positive");
    }
    if (eval_every == 0) {
        throw ParameterError("schedule: eval_every must be positive");
    }
}

Phase plan(std::uint64_t step, const TrainingSchedule& s) {
    if (step == 0) {
        throw ParameterError("plan: steps are numbered from 1");
    }
    if (step <= s.warmstart_supervised_steps) {
        return Phase::Supervised;
    }
    const std::uint64_t period = s.supervised_per_unsupervised + 1;
    const std::uint64_t slot = (step - s.warmstart_supervised_steps - 1 + s.phase_offset) % period;
    return slot == s.supervised_per_unsupervised ? Phase::Unsupervised : Phase::Supervised;
}

void TrainConfig::validate() const {
    schedule.validate();
    component_optimizer.validate();
    discriminator_optimizer.validate();
    weights.validate();
}

// ---------------------------------------------------------------- report

namespace {

using ojson = nlohmann::ordered_json;

ojson losses_json(const StepRecord& r) {
    ojson j;
    j["step"] = r.step;
    j["phase"] = phase_name(r.phase);
    j["lr"] = r.lr;
    j["ce"] = r.losses.ce;
    j["recon"] = r.losses.recon;
    j["adv_c"] = r.losses.adv_c;
    j["adv_s"] = r.losses.adv_s;
    j["adv_y"] = r.losses.adv_y;
    j["disc_c"] = r.losses.disc_c;
    j["disc_s"] = r.losses.disc_s;
    j["disc_y"] = r.losses.disc_y;
    j["total"] = r.losses.total;
    return j;
}

double number(const ojson& j, const char* key) {
    const auto& v = j.at(key);
    // NaN is serialized as null.
    return v.is_null() ? std::nan("") : v.get<double>();
}

} // namespace

std::string report_to_json(const TrainReport& r, bool include_timing) {
    ojson j;
    j["method"] = r.method;
    j["budget"] = r.budget;
    j["seed"] = r.seed;
    j["initial_error"] = r.initial_error;
    j["best_error"] = r.best_error;
    j["best_step"] = r.best_step;
    j["steps_run"] = r.steps_run;
    j["stopped_early"] = r.stopped_early;
    j["diverged"] = r.diverged;
    j["divergence"] = r.divergence;
    if (include_timing) {
        j["wall_clock_seconds"] = r.wall_clock_seconds;
    }
    j["evals"] = ojson::array();
    for (const auto& e : r.evals) {
        j["evals"].push_back({{"step", e.step}, {"error", e.error}});
    }
    j["steps"] = ojson::array();
    for (const auto& s : r.steps) {
        j["steps"].push_back(losses_json(s));
    }
    return j.dump(1) + "\n";
}

TrainReport report_from_json(const std::string& text) {
    TrainReport r;
    try {
        const ojson j = ojson::parse(text);
        r.method = j.at("method").get<std::string>();
        r.budget = j.at("budget").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.initial_error = number(j, "initial_error");
        r.best_error = number(j, "best_error");
        r.best_step = j.at("best_step").get<std::uint64_t>();
        r.steps_run = j.at("steps_run").get<std::uint64_t>();
        r.stopped_early = j.at("stopped_early").get<bool>();
        r.diverged = j.at("diverged").get<bool>();
        r.divergence = j.at("divergence").get<std::string>();
        if (j.contains("wall_clock_seconds")) {
            r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
        }
        for (const auto& e : j.at("evals")) {
            r.evals.push_back({e.at("step").get<std::uint64_t>(), number(e, "error")});
        }
        for (const auto& s : j.at("steps")) {
            StepRecord rec;
            rec.step = s.at("step").get<std::uint64_t>();
            rec.phase = s.at("phase").get<std::string>() == "supervised" ? Phase::Supervised : Phase::Unsupervised;
            rec.lr = number(s, "lr");
            rec.losses.ce = number(s, "ce");
            rec.losses.recon = number(s, "recon");
            rec.losses.adv_c = number(s, "adv_c");
            rec.losses.adv_s = number(s, "adv_s");
            rec.losses.adv_y = number(s, "adv_y");
            rec.losses.disc_c = number(s, "disc_c");
            rec.losses.disc_s = number(s, "disc_s");
            rec.losses.disc_y = number(s, "disc_y");
            rec.losses.total = number(s, "total");
            r.steps.push_back(rec);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("train report: ") + e.what());
    }
    return r;
}

// ------------------------------------------------------------ checkpoint

namespace {

constexpr char kCkptMagic[4] = {'S', 'F', 'C', 'K'};
constexpr std::size_t kCkptFixed = 4 + 4 + 8;

class Writer {
public:
    template <typename T>
    void put(T v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        out.append(buf, sizeof(T));
    }
    void put_string(const std::string& s) {
        put<std::uint64_t>(s.size());
        out += s;
    }
    void put_tensor(const Tensor2& t) {
        put<std::uint64_t>(t.rows());
        put<std::uint64_t>(t.cols());
        out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
    }
    void put_rng(const Rng::State& s) {
        put(s.seed);
        put(s.stream);
        put(s.counter);
        put<std::uint8_t>(s.has_spare ? 1 : 0);
        put(s.spare);
    }
    void put_stream(const BatchStream::State& s) {
        put<std::uint64_t>(s.epoch);
        put<std::uint64_t>(s.position);
    }
    void put_optimizer(const OptimizerState& o) {
        put(o.global_step);
        put<std::uint64_t>(o.moments.size());
        for (const auto& m : o.moments) {
            put(m.steps);
            put_tensor(m.m);
            put_tensor(m.v);
        }
    }

    std::string out;
};

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes, std::size_t base) : bytes_(bytes), base_(base) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        const auto n = get<std::uint64_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    Tensor2 get_tensor() {
        const auto rows = get<std::uint64_t>();
        const auto cols = get<std::uint64_t>();
        if (cols != 0 && rows > (bytes_.size() / sizeof(double)) / cols) {
            fail("tensor of " + shape_string(rows, cols) + " exceeds the payload");
        }
        Tensor2 t(rows, cols);
        need(t.size() * sizeof(double));
        std::memcpy(t.data(), bytes_.data() + pos_, t.size() * sizeof(double));
        pos_ += t.size() * sizeof(double);
        return t;
    }
    Rng::State get_rng() {
        Rng::State s;
        s.seed = get<std::uint64_t>();
        s.stream = get<std::uint64_t>();
        s.counter = get<std::uint64_t>();
        s.has_spare = get<std::uint8_t>() != 0;
        s.spare = get<double>();
        return s;
    }
    BatchStream::State get_stream() {
        BatchStream::State s;
        s.epoch = get<std::uint64_t>();
        s.position = get<std::uint64_t>();
        return s;
    }
    OptimizerState get_optimizer() {
        OptimizerState o;
        o.global_step = get<std::uint64_t>();
        const auto n = get<std::uint64_t>();
        if (n > bytes_.size()) {
            fail("implausible moment count " + std::to_string(n));
        }
        for (std::uint64_t i = 0; i < n; ++i) {
            MomentState m;
            m.steps = get<std::uint64_t>();
            m.m = get_tensor();
            m.v = get_tensor();
            o.moments.push_back(std::move(m));
        }
        return o;
    }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    [[noreturn]] void fail(const std::string& msg) const {
        throw FormatError("checkpoint: " + msg + " at offset " + std::to_string(base_ + pos_));
    }

private:
    void need(std::uint64_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw LengthError("checkpoint truncated at offset " + std::to_string(base_ + pos_));
        }
    }

    std::span<const unsigned char> bytes_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

std::string encode_checkpoint(const CheckpointState& s) {
    Writer w;
    w.put(s.cls_dim);
    w.put(s.num_classes);
    const auto& a = s.architecture;
    w.put(a.width_scale);
    w.put<std::uint64_t>(a.style_dim);
    w.put(a.head_slope);
    w.put(a.cls_disc_slope);
    w.put(a.dropout);
    w.put<std::uint8_t>(a.disc_inter_activations ? 1 : 0);
    w.put(a.disc_inter_slope);
    w.put(s.step);
    w.put(s.best_error);
    w.put(s.evals_since_best);
    w.put_rng(s.dropout_rng);
    w.put_rng(s.prior_rng);
    w.put_stream(s.paired_stream);
    w.put_stream(s.unpaired_stream);
    w.put<std::uint64_t>(s.parameters.size());
    for (const auto& p : s.parameters) {
        w.put_string(p.name);
        w.put_tensor(p.value);
    }
    w.put_optimizer(s.component_optimizer);
    w.put_optimizer(s.discriminator_optimizer);
    w.put_string(s.report_json);

    Writer out;
    out.out.append(kCkptMagic, 4);
    out.put(kCheckpointVersion);
    out.put<std::uint64_t>(w.out.size());
    out.out += w.out;
    const auto* bytes = reinterpret_cast<const unsigned char*>(out.out.data());
    out.put(crc32({bytes, out.out.size()}));
    return out.out;
}

CheckpointState decode_checkpoint(std::span<const unsigned char> bytes) {
    if (bytes.size() < kCkptFixed + 4) {
        throw LengthError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
    }
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, 4);
    const std::uint32_t computed = crc32(bytes.first(body));
    if (stored != computed) {
        throw FormatError("checkpoint CRC mismatch at offset " + std::to_string(body) + " (stored " +
                          std::to_string(stored) + ", computed " + std::to_string(computed) + ")");
    }
    if (std::memcmp(bytes.data(), kCkptMagic, 4) != 0) {
        throw FormatError("checkpoint bad magic at offset 0");
    }
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 4, 4);
    if (version != kCheckpointVersion) {
        throw FormatError("checkpoint unsupported version " + std::to_string(version) + " at offset 4");
    }
    std::uint64_t payload_len = 0;
    std::memcpy(&payload_len, bytes.data() + 8, 8);
    if (payload_len != body - kCkptFixed) {
        throw LengthError("checkpoint payload length " + std::to_string(payload_len) + " does not match the " +
                          std::to_string(body - kCkptFixed) + " bytes present");
    }
    Reader r(bytes.subspan(kCkptFixed, payload_len), kCkptFixed);
    CheckpointState s;
    s.cls_dim = r.get<std::uint32_t>();
    s.num_classes = r.get<std::uint32_t>();
    auto& a = s.architecture;
    a.width_scale = r.get<double>();
    a.style_dim = r.get<std::uint64_t>();
    a.head_slope = r.get<double>();
    a.cls_disc_slope = r.get<double>();
    a.dropout = r.get<double>();
    a.disc_inter_activations = r.get<std::uint8_t>() != 0;
    a.disc_inter_slope = r.get<double>();
    s.step = r.get<std::uint64_t>();
    s.best_error = r.get<double>();
    s.evals_since_best = r.get<std::uint64_t>();
    s.dropout_rng = r.get_rng();
    s.prior_rng = r.get_rng();
    s.paired_stream = r.get_stream();
    s.unpaired_stream = r.get_stream();
    const auto count = r.get<std::uint64_t>();
    if (count > payload_len) {
        r.fail("implausible parameter count " + std::to_string(count));
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedTensor p;
        p.name = r.get_string();
        p.value = r.get_tensor();
        s.parameters.push_back(std::move(p));
    }
    s.component_optimizer = r.get_optimizer();
    s.discriminator_optimizer = r.get_optimizer();
    s.report_json = r.get_string();
    if (!r.at_end()) {
        r.fail("trailing bytes after the report");
    }
    return s;
}

void save_checkpoint(const CheckpointState& state, const std::filesystem::path& path) {
    const std::string bytes = encode_checkpoint(state);
    // Write beside the target and rename so a crash never leaves a torn file.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot open " + tmp.string() + " for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

CheckpointState load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    return decode_checkpoint({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

// --------------------------------------------------------------- trainer

Trainer::Trainer(const EmbeddingDataset& train, const EmbeddingDataset& test, const LabeledSplit& split,
                 std::size_t budget, TrainConfig config)
    : train_(train), config_(std::move(config)) {
    config_.validate();
    if (train.cls_dim != test.cls_dim) {
        throw DimensionError("train cls_dim " + std::to_string(train.cls_dim) + " vs test cls_dim " +
                             std::to_string(test.cls_dim));
    }
    if (train.num_classes != test.num_classes) {
        throw DimensionError("train K " + std::to_string(train.num_classes) + " vs test K " +
                             std::to_string(test.num_classes));
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (test.labels[i] == kUnlabeled) {
            throw ContractError("test row " + std::to_string(i) + " is unlabeled");
        }
    }
    test_rows_ = test.all_rows();
    test_labels_.assign(test.labels.begin(), test.labels.end());

    const std::uint64_t seed = config_.seed;
    Rng init(seed, Stream::Init);
    bundle_ = std::make_unique<ComponentBundle>(train.cls_dim, train.num_classes, init, config_.architecture);
    component_opt_ = AdamW(bundle_->component_parameters(), config_.component_optimizer);
    discriminator_opt_ = AdamW(bundle_->discriminator_parameters(), config_.discriminator_optimizer);
    priors_ = default_priors(*bundle_, train, split.unpaired);
    dropout_rng_ = Rng(seed, Stream::Dropout);
    prior_rng_ = Rng(seed, Stream::Prior);
    const auto& sched = config_.schedule;
    paired_ = BatchStream(split.paired, sched.batch_supervised, seed, BatchMode::Wrap, Stream::PairedOrder);
    unpaired_ = BatchStream(split.unpaired, sched.batch_unsupervised, seed, BatchMode::Partition,
                            Stream::UnpairedOrder);

    report_.method = method_name(config_.method);
    report_.budget = budget;
    report_.seed = seed;
    record_eval();
}

bool Trainer::finished() const noexcept {
    return step_ >= config_.schedule.total_steps || report_.stopped_early || report_.diverged;
}

double Trainer::evaluate() {
    return error_rate(*bundle_, test_rows_, test_labels_);
}

void Trainer::record_eval() {
    const double err = evaluate();
    report_.evals.push_back({step_, err});
    if (report_.evals.size() == 1) {
        report_.initial_error = err;
    }
    if (report_.evals.size() == 1 || err < report_.best_error) {
        report_.best_error = err;
        report_.best_step = step_;
        evals_since_best_ = 0;
    } else {
        ++evals_since_best_;
        const std::size_t patience = config_.schedule.patience;
        if (patience > 0 && evals_since_best_ >= patience) {
            report_.stopped_early = true;
        }
    }
}

LossBreakdown Trainer::supervised_step() {
    const double lr = lr_at(step_ + 1, config_.schedule.total_steps, config_.component_optimizer);
    const auto params = bundle_->supervised_parameters();
    zero_grads(params);
    const Batch batch = paired_.next();
    const Tensor2 y = train_.gather(batch.indices);
    const std::vector<int> labels = train_.gather_labels(batch.indices);
    Tape tape;
    const ForwardMode mode{true, true, &dropout_rng_};
    const SupervisedPass pass = supervised_loss(tape, *bundle_, y, labels, mode);
    tape.backward(pass.loss);
    component_opt_.step(params, lr);
    return pass.breakdown;
}

LossBreakdown Trainer::unsupervised_step() {
    const auto& sched = config_.schedule;
    const double lr_c = lr_at(step_ + 1, sched.total_steps, config_.component_optimizer);
    const double lr_d = lr_at(step_ + 1, sched.total_steps, config_.discriminator_optimizer);
    const auto components = bundle_->component_parameters();
    const auto discriminators = bundle_->discriminator_parameters();

    const Batch batch = unpaired_.next();
    const Tensor2 y = train_.gather(batch.indices);
    Tape tape;
    const ForwardMode mode{true, true, &dropout_rng_};
    const GeneratorForward fwd = generator_forward(tape, *bundle_, y, priors_, mode, prior_rng_);

    LossBreakdown out;
    auto update_discriminators = [&] {
        zero_grads(discriminators);
        const DiscriminatorLosses d = discriminator_gradients(*bundle_, tape, fwd);
        discriminator_opt_.step(lr_d);
        out.disc_c = d.content;
        out.disc_s = d.style;
        out.disc_y = d.cls;
    };
    auto update_components = [&] {
        zero_grads(components);
        const UnsupervisedPass pass = unsupervised_losses(tape, *bundle_, fwd, config_.weights);
        // With every weight zero the step is a no-op, including weight decay.
        if (!config_.weights.all_zero()) {
            tape.backward(pass.total);
            component_opt_.step(lr_c);
        }
        out.recon = pass.breakdown.recon;
        out.adv_c = pass.breakdown.adv_c;
        out.adv_s = pass.breakdown.adv_s;
        out.adv_y = pass.breakdown.adv_y;
        out.total = pass.breakdown.total;
    };
    if (sched.discriminator_first) {
        update_discriminators();
        update_components();
    } else {
        update_components();
        update_discriminators();
    }
    return out;
}

bool Trainer::step() {
    if (finished()) {
        return false;
    }
    const std::uint64_t next = step_ + 1;
    const Phase phase =
        config_.method == Method::Supervised ? Phase::Supervised : plan(next, config_.schedule);
    StepRecord rec;
    rec.step = next;
    rec.phase = phase;
    rec.lr = lr_at(next, config_.schedule.total_steps, config_.component_optimizer);
    try {
        rec.losses = phase == Phase::Supervised ? supervised_step() : unsupervised_step();
        if (!rec.losses.all_finite()) {
            throw NumericError("non-finite loss");
        }
    } catch (const NumericError& e) {
        report_.diverged = true;
        report_.divergence = "step " + std::to_string(next) + ": " + e.what();
        return false;
    }
    step_ = next;
    report_.steps.push_back(rec);
    report_.steps_run = step_;
    if (step_ % config_.schedule.eval_every == 0 || step_ == config_.schedule.total_steps) {
        record_eval();
    }
    return !finished();
}

void Trainer::run(std::uint64_t until_step) {
    while (!finished() && (until_step == 0 || step_ < until_step)) {
        step();
    }
}

CheckpointState Trainer::checkpoint() const {
    CheckpointState s;
    s.cls_dim = static_cast<std::uint32_t>(bundle_->cls_dim());
    s.num_classes = static_cast<std::uint32_t>(bundle_->num_classes());
    s.architecture = bundle_->architecture();
    for (const Parameter* p : bundle_->all_parameters()) {
        s.parameters.push_back({p->name, p->value});
    }
    s.component_optimizer = {component_opt_.global_step(), component_opt_.states()};
    s.discriminator_optimizer = {discriminator_opt_.global_step(), discriminator_opt_.states()};
    s.step = step_;
    s.dropout_rng = dropout_rng_.state();
    s.prior_rng = prior_rng_.state();
    s.paired_stream = paired_.state();
    s.unpaired_stream = unpaired_.state();
    s.best_error = report_.best_error;
    s.evals_since_best = evals_since_best_;
    s.report_json = report_to_json(report_);
    return s;
}

namespace {

void restore_optimizer(AdamW& opt, const OptimizerState& state, const char* which) {
    auto& moments = opt.states();
    if (state.moments.size() != moments.size()) {
        throw DimensionError(std::string("checkpoint ") + which + " optimizer has " +
                             std::to_string(state.moments.size()) + " moment tensors, model has " +
                             std::to_string(moments.size()));
    }
    for (std::size_t i = 0; i < moments.size(); ++i) {
        const auto* p = opt.parameters()[i];
        if (!state.moments[i].m.same_shape(p->value) || !state.moments[i].v.same_shape(p->value)) {
            throw DimensionError(std::string("checkpoint ") + which + " moment for " + p->name + " is " +
                                 state.moments[i].m.shape_string() + ", parameter is " + p->value.shape_string());
        }
    }
    moments = state.moments;
    opt.set_global_step(state.global_step);
}

} // namespace

void Trainer::restore(const CheckpointState& s) {
    if (s.cls_dim != bundle_->cls_dim()) {
        throw DimensionError("checkpoint cls_dim " + std::to_string(s.cls_dim) + " does not match model cls_dim " +
                             std::to_string(bundle_->cls_dim()));
    }
    if (s.num_classes != bundle_->num_classes()) {
        throw DimensionError("checkpoint K " + std::to_string(s.num_classes) + " does not match model K " +
                             std::to_string(bundle_->num_classes()));
    }
    if (!(s.architecture == bundle_->architecture())) {
        throw ContractError("checkpoint architecture differs from the configured one");
    }
    const auto params = bundle_->all_parameters();
    if (s.parameters.size() != params.size()) {
        throw DimensionError("checkpoint holds " + std::to_string(s.parameters.size()) + " tensors, model has " +
                             std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (s.parameters[i].name != params[i]->name || !s.parameters[i].value.same_shape(params[i]->value)) {
            throw DimensionError("checkpoint tensor " + s.parameters[i].name + " " +
                                 s.parameters[i].value.shape_string() + " does not match model tensor " +
                                 params[i]->name + " " + params[i]->value.shape_string());
        }
    }
    if (!std::all_of(s.parameters.begin(), s.parameters.end(),
                     [](const NamedTensor& t) { return t.value.all_finite(); })) {
        throw NumericError("checkpoint holds non-finite parameters");
    }
    TrainReport report = report_from_json(s.report_json);
    restore_optimizer(component_opt_, s.component_optimizer, "component");
    restore_optimizer(discriminator_opt_, s.discriminator_optimizer, "discriminator");
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value = s.parameters[i].value;
        params[i]->zero_grad();
    }
    step_ = s.step;
    dropout_rng_.restore(s.dropout_rng);
    prior_rng_.restore(s.prior_rng);
    paired_.restore(s.paired_stream);
    unpaired_.restore(s.unpaired_stream);
    evals_since_best_ = s.evals_since_best;
    report_ = std::move(report);
    report_.best_error = s.best_error;
}

std::unique_ptr<ComponentBundle> bundle_from_checkpoint(const CheckpointState& s) {
    Rng init(0, Stream::Init);
    auto bundle = std::make_unique<ComponentBundle>(s.cls_dim, s.num_classes, init, s.architecture);
    const auto params = bundle->all_parameters();
    if (s.parameters.size() != params.size()) {
        throw DimensionError("checkpoint holds " + std::to_string(s.parameters.size()) + " tensors, model has " +
                             std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (s.parameters[i].name != params[i]->name || !s.parameters[i].value.same_shape(params[i]->value)) {
            throw DimensionError("checkpoint tensor " + s.parameters[i].name + " " +
                                 s.parameters[i].value.shape_string() + " does not match model tensor " +
                                 params[i]->name + " " + params[i]->value.shape_string());
        }
        params[i]->value = s.parameters[i].value;
    }
    return bundle;
}

FitResult fit(const EmbeddingDataset& train, const EmbeddingDataset& test, std::size_t budget,
              const TrainConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const LabeledSplit split = select_labeled(train, budget, config.seed);
    Trainer trainer(train, test, split, budget, config);
    trainer.run();
    FitResult out;
    out.report = trainer.report();
    out.report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.bundle = trainer.release_bundle();
    return out;
}

} // namespace csft
