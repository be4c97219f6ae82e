#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "csft/nets.hpp"

namespace csft {

// Architecture knobs. Defaults reproduce the reference tables exactly:
// encoder 8000 wide, content hidden 1024, decoder 2560, style 100,
// LeakyReLU 0.01 in heads/decoder and 0.02 in the CLS discriminator,
// dropout 0.3.
struct ArchitectureConfig {
    // Multiplies the three large hidden widths (8000, 1024, 2560). Values
    // below 1 give a narrower model for quick desk experiments; 1 is the
    // reference architecture.
    double width_scale = 1.0;
    std::size_t style_dim = 100;
    double head_slope = 0.01;
    double cls_disc_slope = 0.02;
    double dropout = 0.3;
    // The content and style discriminator tables list consecutive Linear
    // layers with no nonlinearity. When set, LeakyReLU(disc_inter_slope) is
    // inserted between them. This diverges from the tables and is reported
    // by divergence_flags().
    bool disc_inter_activations = true;
    double disc_inter_slope = 0.02;

    std::vector<std::string> divergence_flags() const;
    std::size_t encoder_width() const;
    std::size_t content_hidden_width() const;
    std::size_t decoder_width() const;

    friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

NetSpec shared_encoder_spec(std::size_t cls_dim, const ArchitectureConfig& arch = {});
NetSpec content_head_spec(std::size_t num_classes, const ArchitectureConfig& arch = {});
NetSpec style_head_spec(const ArchitectureConfig& arch = {});
NetSpec decoder_spec(std::size_t num_classes, std::size_t cls_dim, const ArchitectureConfig& arch = {});
NetSpec content_discriminator_spec(std::size_t num_classes, const ArchitectureConfig& arch = {});
NetSpec style_discriminator_spec(const ArchitectureConfig& arch = {});
NetSpec cls_discriminator_spec(std::size_t cls_dim, const ArchitectureConfig& arch = {});

struct Encoded {
    Var hidden;         // shared encoder activation, computed once
    Var content_logits; // [b x K]
    Var style;          // [b x style_dim]
};

// Shared encoder, content/style heads, decoder and the three discriminators.
class ComponentBundle {
public:
    ComponentBundle(std::size_t cls_dim, std::size_t num_classes, Rng& init_rng,
                    ArchitectureConfig arch = {});

    std::size_t cls_dim() const noexcept { return cls_dim_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t style_dim() const noexcept { return arch_.style_dim; }
    const ArchitectureConfig& architecture() const noexcept { return arch_; }

    Encoded encode(Tape& tape, Var y, const ForwardMode& mode);
    // Concatenates [content | style] and runs the decoder.
    Var decode(Tape& tape, Var content, Var style, const ForwardMode& mode);
    // Raw logits; the sigmoid lives in the BCE op.
    static Var discriminate(Tape& tape, Mlp& disc, Var v, bool trainable);

    // Tensor-level conveniences, inference mode (dropout off).
    Tensor2 content_logits(const Tensor2& y);
    // Content-head activations before its output layer (post-LeakyReLU).
    Tensor2 content_features(const Tensor2& y);

    Mlp shared_encoder;
    Mlp content_head;
    Mlp style_head;
    Mlp decoder;
    Mlp disc_content;
    Mlp disc_style;
    Mlp disc_cls;

    // Parameter groups, in a fixed order.
    std::vector<Parameter*> supervised_parameters();   // encoder + content head
    std::vector<Parameter*> component_parameters();    // encoder, heads, decoder
    std::vector<Parameter*> discriminator_parameters();
    std::vector<Parameter*> all_parameters();

private:
    std::size_t cls_dim_;
    std::size_t num_classes_;
    ArchitectureConfig arch_;
};

ComponentBundle build_bundle(std::size_t cls_dim, std::size_t num_classes, Rng& init_rng,
                             const ArchitectureConfig& arch = {});

} // namespace csft
