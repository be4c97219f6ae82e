#include "csft/components.hpp"

#include <algorithm>
#include <cmath>

#include "csft/error.hpp"

namespace csft {

namespace {

std::size_t scaled(std::size_t width, double scale) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(width) * scale)));
}

void append(std::vector<Parameter*>& dst, Mlp& net) {
    const auto ps = net.parameters();
    dst.insert(dst.end(), ps.begin(), ps.end());
}

void validate(const ArchitectureConfig& arch) {
    if (!(arch.width_scale > 0.0) || arch.style_dim == 0) {
        throw ParameterError("architecture: width_scale and style_dim must be positive");
    }
}

} // namespace

std::vector<std::string> ArchitectureConfig::divergence_flags() const {
    if (!disc_inter_activations) {
        return {};
    }
    return {"disc_content.inserted_leaky_relu", "disc_style.inserted_leaky_relu"};
}

std::size_t ArchitectureConfig::encoder_width() const { return scaled(8000, width_scale); }
std::size_t ArchitectureConfig::content_hidden_width() const { return scaled(1024, width_scale); }
std::size_t ArchitectureConfig::decoder_width() const { return scaled(2560, width_scale); }

NetSpec shared_encoder_spec(std::size_t cls_dim, const ArchitectureConfig& arch) {
    return {"shared_encoder",
            cls_dim,
            {LayerSpec::linear(arch.encoder_width()), LayerSpec::leaky_relu(arch.head_slope),
             LayerSpec::dropout(arch.dropout)}};
}

NetSpec content_head_spec(std::size_t num_classes, const ArchitectureConfig& arch) {
    return {"content_head",
            arch.encoder_width(),
            {LayerSpec::linear(arch.content_hidden_width()), LayerSpec::leaky_relu(arch.head_slope),
             LayerSpec::linear(num_classes)}};
}

NetSpec style_head_spec(const ArchitectureConfig& arch) {
    return {"style_head", arch.encoder_width(), {LayerSpec::linear(arch.style_dim)}};
}

NetSpec decoder_spec(std::size_t num_classes, std::size_t cls_dim, const ArchitectureConfig& arch) {
    const std::size_t w = arch.decoder_width();
    return {"decoder",
            num_classes + arch.style_dim,
            {LayerSpec::linear(w), LayerSpec::leaky_relu(arch.head_slope), LayerSpec::dropout(arch.dropout),
             LayerSpec::linear(w), LayerSpec::leaky_relu(arch.head_slope), LayerSpec::dropout(arch.dropout),
             LayerSpec::linear(cls_dim)}};
}

NetSpec content_discriminator_spec(std::size_t num_classes, const ArchitectureConfig& arch) {
    NetSpec s{"disc_content", num_classes, {}};
    s.layers.push_back(LayerSpec::linear(500));
    if (arch.disc_inter_activations) {
        s.layers.push_back(LayerSpec::leaky_relu(arch.disc_inter_slope));
    }
    s.layers.push_back(LayerSpec::linear(500));
    if (arch.disc_inter_activations) {
        s.layers.push_back(LayerSpec::leaky_relu(arch.disc_inter_slope));
    }
    s.layers.push_back(LayerSpec::linear(1));
    return s;
}

NetSpec style_discriminator_spec(const ArchitectureConfig& arch) {
    NetSpec s{"disc_style", arch.style_dim, {}};
    s.layers.push_back(LayerSpec::linear(50));
    if (arch.disc_inter_activations) {
        s.layers.push_back(LayerSpec::leaky_relu(arch.disc_inter_slope));
    }
    s.layers.push_back(LayerSpec::linear(500));
    if (arch.disc_inter_activations) {
        s.layers.push_back(LayerSpec::leaky_relu(arch.disc_inter_slope));
    }
    s.layers.push_back(LayerSpec::linear(1));
    return s;
}

NetSpec cls_discriminator_spec(std::size_t cls_dim, const ArchitectureConfig& arch) {
    const double a = arch.cls_disc_slope;
    return {"disc_cls",
            cls_dim,
            {LayerSpec::linear(128), LayerSpec::leaky_relu(a), LayerSpec::linear(64), LayerSpec::leaky_relu(a),
             LayerSpec::linear(32), LayerSpec::leaky_relu(a), LayerSpec::linear(1)}};
}

ComponentBundle::ComponentBundle(std::size_t cls_dim, std::size_t num_classes, Rng& init_rng,
                                 ArchitectureConfig arch)
    : cls_dim_(cls_dim), num_classes_(num_classes), arch_(arch) {
    if (cls_dim < 1) {
        throw ParameterError("build_bundle: cls_dim must be at least 1");
    }
    if (num_classes < 2) {
        throw ParameterError("build_bundle: need at least 2 classes, got " + std::to_string(num_classes));
    }
    validate(arch_);
    shared_encoder = Mlp(shared_encoder_spec(cls_dim, arch_), init_rng);
    content_head = Mlp(content_head_spec(num_classes, arch_), init_rng);
    style_head = Mlp(style_head_spec(arch_), init_rng);
    decoder = Mlp(decoder_spec(num_classes, cls_dim, arch_), init_rng);
    disc_content = Mlp(content_discriminator_spec(num_classes, arch_), init_rng);
    disc_style = Mlp(style_discriminator_spec(arch_), init_rng);
    disc_cls = Mlp(cls_discriminator_spec(cls_dim, arch_), init_rng);
}

Encoded ComponentBundle::encode(Tape& tape, Var y, const ForwardMode& mode) {
    const Var hidden = shared_encoder.forward(tape, y, mode);
    const Var logits = content_head.forward(tape, hidden, mode);
    const Var style = style_head.forward(tape, hidden, mode);
    return {hidden, logits, style};
}

Var ComponentBundle::decode(Tape& tape, Var content, Var style, const ForwardMode& mode) {
    const auto& c = tape.value(content);
    const auto& s = tape.value(style);
    if (c.cols() != num_classes_ || s.cols() != arch_.style_dim) {
        throw DimensionError("decode: expected content width " + std::to_string(num_classes_) +
                             " and style width " + std::to_string(arch_.style_dim) + ", got " +
                             c.shape_string() + " and " + s.shape_string());
    }
    return decoder.forward(tape, tape.concat_cols(content, style), mode);
}

Var ComponentBundle::discriminate(Tape& tape, Mlp& disc, Var v, bool trainable) {
    return disc.forward(tape, v, ForwardMode{false, trainable, nullptr});
}

Tensor2 ComponentBundle::content_logits(const Tensor2& y) {
    Tape tape;
    const auto mode = ForwardMode::inference();
    const Var hidden = shared_encoder.forward(tape, tape.input(y), mode);
    return tape.value(content_head.forward(tape, hidden, mode));
}

Tensor2 ComponentBundle::content_features(const Tensor2& y) {
    Tape tape;
    const auto mode = ForwardMode::inference();
    const Var hidden = shared_encoder.forward(tape, tape.input(y), mode);
    const std::size_t before_output = content_head.spec().layers.size() - 1;
    return tape.value(content_head.forward_prefix(tape, hidden, mode, before_output));
}

std::vector<Parameter*> ComponentBundle::supervised_parameters() {
    std::vector<Parameter*> out;
    append(out, shared_encoder);
    append(out, content_head);
    return out;
}

std::vector<Parameter*> ComponentBundle::component_parameters() {
    std::vector<Parameter*> out = supervised_parameters();
    append(out, style_head);
    append(out, decoder);
    return out;
}

std::vector<Parameter*> ComponentBundle::discriminator_parameters() {
    std::vector<Parameter*> out;
    append(out, disc_content);
    append(out, disc_style);
    append(out, disc_cls);
    return out;
}

std::vector<Parameter*> ComponentBundle::all_parameters() {
    std::vector<Parameter*> out = component_parameters();
    const auto d = discriminator_parameters();
    out.insert(out.end(), d.begin(), d.end());
    return out;
}

ComponentBundle build_bundle(std::size_t cls_dim, std::size_t num_classes, Rng& init_rng,
                             const ArchitectureConfig& arch) {
    return ComponentBundle(cls_dim, num_classes, init_rng, arch);
}

} // namespace csft
