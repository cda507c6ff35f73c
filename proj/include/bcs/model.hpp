#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/fingerprint.hpp"
#include "bcs/formats.hpp"
#include "bcs/image.hpp"
#include "bcs/nn/layers.hpp"
#include "bcs/nn/tensor.hpp"
#include "bcs/rng.hpp"
#include "bcs/sensing.hpp"

namespace bcs {

struct ModelConfig {
    int in_channels = 4;
    int upsample_channels = 64;
    std::array<int, 5> encoder_channels{64, 128, 256, 512, 512};
    int block_size = 4;
    double leaky_slope = 0.02;

    void validate() const {
        if (in_channels < 1) throw ValidationError("in_channels must be positive");
        if (upsample_channels < 1) throw ValidationError("upsample_channels must be positive");
        for (int c : encoder_channels)
            if (c < 1) throw ValidationError("encoder channels must be positive");
        if (block_size != 4)
            throw ValidationError("block_size must be 4 for the 2-stage 4x upsampler");
        if (leaky_slope < 0.0 || leaky_slope >= 1.0)
            throw ValidationError("leaky_slope must lie in [0, 1)");
    }
};

namespace nn {

// Transpose-conv 2x block with a projected residual: the input cannot be
// added raw across the upsampling, so it rides a nearest-2x + 1x1-conv path.
class UpsampleBlock {
public:
    UpsampleBlock(int in_c, int out_c)
        : tconv_(in_c, out_c, 4, 2, 1), bn1_(out_c),
          conv_(out_c, out_c, 3, 1, 1), bn2_(out_c),
          proj_(in_c, out_c, 1, 1, 0) {}

    void init(Rng& rng) {
        tconv_.init(rng);
        conv_.init(rng);
        proj_.init(rng);
    }

    Tensor4 forward(const Tensor4& x, bool training) {
        Tensor4 t = relu1_.forward(bn1_.forward(tconv_.forward(x), training));
        Tensor4 u = bn2_.forward(conv_.forward(t), training);
        Tensor4 r = proj_.forward(up_.forward(x));
        for (std::size_t i = 0; i < u.v.size(); ++i) u.v[i] += r.v[i];
        return relu2_.forward(u);
    }

    Tensor4 backward(const Tensor4& gout) {
        Tensor4 gsum = relu2_.backward(gout);
        Tensor4 gx = up_.backward(proj_.backward(gsum));
        Tensor4 gmain = tconv_.backward(bn1_.backward(relu1_.backward(conv_.backward(bn2_.backward(gsum)))));
        for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gmain.v[i];
        return gx;
    }

    void collect(const std::string& p, std::vector<ParamRef>& out) {
        tconv_.collect(p + ".tconv", out);
        bn1_.collect(p + ".bn1", out);
        conv_.collect(p + ".conv", out);
        bn2_.collect(p + ".bn2", out);
        proj_.collect(p + ".proj", out);
    }

    void collect_buffers(const std::string& p, std::vector<ParamRef>& out) {
        bn1_.collect_buffers(p + ".bn1", out);
        bn2_.collect_buffers(p + ".bn2", out);
    }

private:
    ConvTranspose2d tconv_;
    BatchNorm2d bn1_;
    Conv2d conv_;
    BatchNorm2d bn2_;
    Conv2d proj_;
    LeakyReLU relu1_{0.0}, relu2_{0.0};
    NearestUpsample2x up_;
};

class EncoderBlock {
public:
    EncoderBlock(int in_c, int out_c, double slope)
        : conv_(in_c, out_c, 4, 2, 1), act_(slope), bn_(out_c) {}

    void init(Rng& rng) { conv_.init(rng); }

    Tensor4 forward(const Tensor4& x, bool training) {
        return bn_.forward(act_.forward(conv_.forward(x)), training);
    }

    Tensor4 backward(const Tensor4& gout) {
        return conv_.backward(act_.backward(bn_.backward(gout)));
    }

    void collect(const std::string& p, std::vector<ParamRef>& out) {
        conv_.collect(p + ".conv", out);
        bn_.collect(p + ".bn", out);
    }

    void collect_buffers(const std::string& p, std::vector<ParamRef>& out) {
        bn_.collect_buffers(p + ".bn", out);
    }

private:
    Conv2d conv_;
    LeakyReLU act_;
    BatchNorm2d bn_;
};

class DecoderBlock {
public:
    DecoderBlock(int in_c, int out_c)
        : tconv_(in_c, out_c, 4, 2, 1), bn_(out_c) {}

    void init(Rng& rng) { tconv_.init(rng); }

    Tensor4 forward(const Tensor4& x, bool training) {
        return bn_.forward(act_.forward(tconv_.forward(x)), training);
    }

    Tensor4 backward(const Tensor4& gout) {
        return tconv_.backward(act_.backward(bn_.backward(gout)));
    }

    void collect(const std::string& p, std::vector<ParamRef>& out) {
        tconv_.collect(p + ".tconv", out);
        bn_.collect(p + ".bn", out);
    }

    void collect_buffers(const std::string& p, std::vector<ParamRef>& out) {
        bn_.collect_buffers(p + ".bn", out);
    }

private:
    ConvTranspose2d tconv_;
    LeakyReLU act_{0.0};
    BatchNorm2d bn_;
};

}  // namespace nn

// UpsampleNet (2 x 2x residual upsampling) followed by a 5-down / 5-up UNet.
// Skips: E5 feeds D1 directly; E4..E1 are concatenated onto the inputs of
// D2, D3, D4 and the final output layer. The output layer's transpose conv
// performs the fifth 2x upsampling and projects to one sigmoid channel.
class BcsUnet {
public:
    explicit BcsUnet(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const auto& e = cfg_.encoder_channels;
        up_.emplace_back(cfg_.in_channels, cfg_.upsample_channels);
        up_.emplace_back(cfg_.upsample_channels, cfg_.upsample_channels);
        enc_.emplace_back(cfg_.upsample_channels, e[0], cfg_.leaky_slope);
        for (int i = 1; i < 5; ++i) enc_.emplace_back(e[i - 1], e[i], cfg_.leaky_slope);
        dec_.emplace_back(e[4], e[3]);
        dec_.emplace_back(e[3] + e[3], e[2]);
        dec_.emplace_back(e[2] + e[2], e[1]);
        dec_.emplace_back(e[1] + e[1], e[0]);
        out_tconv_ = std::make_unique<nn::ConvTranspose2d>(e[0] + e[0], 1, 4, 2, 1);
    }

    const ModelConfig& config() const { return cfg_; }

    void init(uint64_t seed) {
        Rng rng(seed);
        for (auto& b : up_) b.init(rng);
        for (auto& b : enc_) b.init(rng);
        for (auto& b : dec_) b.init(rng);
        out_tconv_->init(rng);
    }

    void check_input(const nn::Tensor4& x) const {
        if (x.c != cfg_.in_channels) throw DimensionError("model input channel mismatch");
        const int oh = 4 * x.h, ow = 4 * x.w;
        if (oh < 32 || ow < 32)
            throw DimensionError("model input must map to at least 32x32 elements");
        if (oh % 32 != 0 || ow % 32 != 0)
            throw DimensionError("model output dims must be divisible by 32");
    }

    nn::Tensor4 forward(const nn::Tensor4& x, bool training) {
        check_input(x);
        nn::Tensor4 u = up_[1].forward(up_[0].forward(x, training), training);
        nn::Tensor4 e1 = enc_[0].forward(u, training);
        nn::Tensor4 e2 = enc_[1].forward(e1, training);
        nn::Tensor4 e3 = enc_[2].forward(e2, training);
        nn::Tensor4 e4 = enc_[3].forward(e3, training);
        nn::Tensor4 e5 = enc_[4].forward(e4, training);
        nn::Tensor4 d1 = dec_[0].forward(e5, training);
        nn::Tensor4 d2 = dec_[1].forward(nn::concat_channels(d1, e4), training);
        nn::Tensor4 d3 = dec_[2].forward(nn::concat_channels(d2, e3), training);
        nn::Tensor4 d4 = dec_[3].forward(nn::concat_channels(d3, e2), training);
        return out_act_.forward(out_tconv_->forward(nn::concat_channels(d4, e1)));
    }

    nn::Tensor4 backward(const nn::Tensor4& gout) {
        const auto& e = cfg_.encoder_channels;
        auto [gd4, ge1s] = nn::split_channels(out_tconv_->backward(out_act_.backward(gout)), e[0]);
        auto [gd3, ge2s] = nn::split_channels(dec_[3].backward(gd4), e[1]);
        auto [gd2, ge3s] = nn::split_channels(dec_[2].backward(gd3), e[2]);
        auto [gd1, ge4s] = nn::split_channels(dec_[1].backward(gd2), e[3]);
        nn::Tensor4 ge5 = dec_[0].backward(gd1);
        nn::Tensor4 ge4 = enc_[4].backward(ge5);
        for (std::size_t i = 0; i < ge4.v.size(); ++i) ge4.v[i] += ge4s.v[i];
        nn::Tensor4 ge3 = enc_[3].backward(ge4);
        for (std::size_t i = 0; i < ge3.v.size(); ++i) ge3.v[i] += ge3s.v[i];
        nn::Tensor4 ge2 = enc_[2].backward(ge3);
        for (std::size_t i = 0; i < ge2.v.size(); ++i) ge2.v[i] += ge2s.v[i];
        nn::Tensor4 ge1 = enc_[1].backward(ge2);
        for (std::size_t i = 0; i < ge1.v.size(); ++i) ge1.v[i] += ge1s.v[i];
        nn::Tensor4 gu = enc_[0].backward(ge1);
        return up_[0].backward(up_[1].backward(gu));
    }

    std::vector<nn::ParamRef> parameters() {
        std::vector<nn::ParamRef> out;
        for (std::size_t i = 0; i < up_.size(); ++i) up_[i].collect("up" + std::to_string(i + 1), out);
        for (std::size_t i = 0; i < enc_.size(); ++i) enc_[i].collect("enc" + std::to_string(i + 1), out);
        for (std::size_t i = 0; i < dec_.size(); ++i) dec_[i].collect("dec" + std::to_string(i + 1), out);
        out_tconv_->collect("out.tconv", out);
        return out;
    }

    std::vector<nn::ParamRef> buffers() {
        std::vector<nn::ParamRef> out;
        for (std::size_t i = 0; i < up_.size(); ++i) up_[i].collect_buffers("up" + std::to_string(i + 1), out);
        for (std::size_t i = 0; i < enc_.size(); ++i) enc_[i].collect_buffers("enc" + std::to_string(i + 1), out);
        for (std::size_t i = 0; i < dec_.size(); ++i) dec_[i].collect_buffers("dec" + std::to_string(i + 1), out);
        return out;
    }

    std::vector<nn::ParamRef> state() {
        std::vector<nn::ParamRef> out = parameters();
        std::vector<nn::ParamRef> buf = buffers();
        out.insert(out.end(), buf.begin(), buf.end());
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.value->size();
        return n;
    }

private:
    ModelConfig cfg_;
    std::vector<nn::UpsampleBlock> up_;
    std::vector<nn::EncoderBlock> enc_;
    std::vector<nn::DecoderBlock> dec_;
    std::unique_ptr<nn::ConvTranspose2d> out_tconv_;
    nn::Sigmoid out_act_;
};

// Eq. 3: mean over the batch of per-image mean absolute error.
inline double mae_loss(const nn::Tensor4& outputs, const nn::Tensor4& targets) {
    if (!outputs.same_shape(targets)) throw DimensionError("loss: shape mismatch");
    if (outputs.n == 0) throw ValidationError("loss: empty batch");
    const std::size_t n_pix = outputs.item_size();
    double total = 0.0;
    for (int k = 0; k < outputs.n; ++k) {
        const double* o = outputs.item(k);
        const double* t = targets.item(k);
        double item = 0.0;
        for (std::size_t i = 0; i < n_pix; ++i) item += std::abs(o[i] - t[i]);
        total += item / static_cast<double>(n_pix);
    }
    return total / static_cast<double>(outputs.n);
}

inline nn::Tensor4 mae_loss_grad(const nn::Tensor4& outputs, const nn::Tensor4& targets) {
    if (!outputs.same_shape(targets)) throw DimensionError("loss: shape mismatch");
    nn::Tensor4 g(outputs.n, outputs.c, outputs.h, outputs.w);
    const double scale = 1.0 / (static_cast<double>(outputs.n) * outputs.item_size());
    for (std::size_t i = 0; i < g.v.size(); ++i) {
        const double d = outputs.v[i] - targets.v[i];
        g.v[i] = d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
    }
    return g;
}

struct TrainingMetadata {
    int epochs_run = 0;
    double best_val_loss = 0.0;
    bool trained = false;
};

struct ModelArtifact {
    std::shared_ptr<BcsUnet> model;
    Fingerprint matrix_fingerprint{};
    double ratio = 0.0;
    int block_size = 4;
    TrainingMetadata metadata;

    const ModelConfig& config() const { return model->config(); }
};

inline ModelArtifact build_model(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelArtifact art;
    art.model = std::make_shared<BcsUnet>(cfg);
    art.model->init(seed);
    art.block_size = cfg.block_size;
    return art;
}

inline nn::Tensor4 tensor_to_nchw(const MeasurementTensor& t) {
    nn::Tensor4 out(1, t.channels, t.grid_h, t.grid_w);
    for (int i = 0; i < t.grid_h; ++i)
        for (int j = 0; j < t.grid_w; ++j)
            for (int m = 0; m < t.channels; ++m)
                out.at(0, m, i, j) = t.at(i, j, m);
    return out;
}

inline ImagePlane nchw_to_image(const nn::Tensor4& t, int item) {
    if (t.c != 1) throw DimensionError("expected a single-channel tensor");
    ImagePlane img(t.w, t.h);
    const double* src = t.item(item);
    std::copy(src, src + t.item_size(), img.pixels.begin());
    return img;
}

inline nn::Tensor4 image_to_nchw(const ImagePlane& img) {
    nn::Tensor4 t(1, 1, img.height, img.width);
    std::copy(img.pixels.begin(), img.pixels.end(), t.v.begin());
    return t;
}

inline ImagePlane model_forward(BcsUnet& model, const MeasurementTensor& t) {
    return nchw_to_image(model.forward(tensor_to_nchw(t), false), 0);
}

inline ImagePlane reconstruct(const ModelArtifact& art, const MeasurementTensor& t) {
    if (t.matrix_fingerprint != art.matrix_fingerprint)
        throw ProvenanceError("measurement tensor fingerprint does not match the model artifact");
    return model_forward(*art.model, t);
}

// --- artifact serialization -------------------------------------------------
//
// Container layout (all integers little-endian):
//   magic "BCSA", version byte 0x01
//   u32 manifest length, manifest bytes (UTF-8 key=value lines)
//   u32 blob count, then per blob:
//     u16 name length, name bytes, u64 element count, elements as f64 LE

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::map<std::string, std::string> parse_manifest(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("artifact manifest: malformed line");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

inline const std::string& manifest_get(const std::map<std::string, std::string>& kv,
                                       const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("artifact manifest: missing key " + key);
    return it->second;
}

}  // namespace detail

inline void save_artifact(ModelArtifact& art, const std::string& path) {
    std::string manifest;
    const ModelConfig& cfg = art.config();
    manifest += "format=bcs-model\n";
    manifest += "in_channels=" + std::to_string(cfg.in_channels) + "\n";
    manifest += "upsample_channels=" + std::to_string(cfg.upsample_channels) + "\n";
    std::string enc;
    for (int c : cfg.encoder_channels) enc += (enc.empty() ? "" : ",") + std::to_string(c);
    manifest += "encoder_channels=" + enc + "\n";
    manifest += "block_size=" + std::to_string(cfg.block_size) + "\n";
    manifest += "leaky_slope=" + detail::format_double(cfg.leaky_slope) + "\n";
    manifest += "matrix_fingerprint=" + to_hex(art.matrix_fingerprint) + "\n";
    manifest += "ratio=" + detail::format_double(art.ratio) + "\n";
    manifest += "epochs_run=" + std::to_string(art.metadata.epochs_run) + "\n";
    manifest += "best_val_loss=" + detail::format_double(art.metadata.best_val_loss) + "\n";
    manifest += std::string("trained=") + (art.metadata.trained ? "1" : "0") + "\n";

    std::vector<uint8_t> out;
    out.push_back('B'); out.push_back('C'); out.push_back('S'); out.push_back('A');
    out.push_back(0x01);
    wire::put_u32(out, static_cast<uint32_t>(manifest.size()));
    out.insert(out.end(), manifest.begin(), manifest.end());
    const auto blobs = art.model->state();
    wire::put_u32(out, static_cast<uint32_t>(blobs.size()));
    for (const auto& b : blobs) {
        wire::put_u16(out, static_cast<uint16_t>(b.name.size()));
        out.insert(out.end(), b.name.begin(), b.name.end());
        wire::put_u64(out, b.value->size());
        for (double v : *b.value) wire::put_f64(out, v);
    }
    wire::write_file(path, out);
}

inline ModelArtifact load_artifact(const std::string& path) {
    const std::vector<uint8_t> raw = wire::read_file(path);
    wire::Reader r(raw.data(), raw.size(), "artifact");
    const std::uint8_t* magic = r.take(4);
    if (magic[0] != 'B' || magic[1] != 'C' || magic[2] != 'S' || magic[3] != 'A')
        throw FormatError("not a model artifact file");
    if (r.u8() != 0x01) throw FormatError("unsupported artifact version");
    const uint32_t mlen = r.u32();
    std::string manifest(reinterpret_cast<const char*>(r.take(mlen)), mlen);
    const auto kv = detail::parse_manifest(manifest);
    if (detail::manifest_get(kv, "format") != "bcs-model")
        throw FormatError("artifact manifest: wrong format tag");

    ModelConfig cfg;
    cfg.in_channels = std::stoi(detail::manifest_get(kv, "in_channels"));
    cfg.upsample_channels = std::stoi(detail::manifest_get(kv, "upsample_channels"));
    {
        std::istringstream es(detail::manifest_get(kv, "encoder_channels"));
        std::string tok;
        int i = 0;
        while (std::getline(es, tok, ',')) {
            if (i >= 5) throw FormatError("artifact manifest: too many encoder channels");
            cfg.encoder_channels[static_cast<std::size_t>(i++)] = std::stoi(tok);
        }
        if (i != 5) throw FormatError("artifact manifest: expected 5 encoder channels");
    }
    cfg.block_size = std::stoi(detail::manifest_get(kv, "block_size"));
    cfg.leaky_slope = std::stod(detail::manifest_get(kv, "leaky_slope"));

    ModelArtifact art;
    art.model = std::make_shared<BcsUnet>(cfg);
    art.matrix_fingerprint = fingerprint_from_hex(detail::manifest_get(kv, "matrix_fingerprint"));
    art.ratio = std::stod(detail::manifest_get(kv, "ratio"));
    art.block_size = cfg.block_size;
    art.metadata.epochs_run = std::stoi(detail::manifest_get(kv, "epochs_run"));
    art.metadata.best_val_loss = std::stod(detail::manifest_get(kv, "best_val_loss"));
    art.metadata.trained = detail::manifest_get(kv, "trained") == "1";

    std::map<std::string, std::vector<double>*> slots;
    for (auto& b : art.model->state()) slots[b.name] = b.value;
    const uint32_t nblobs = r.u32();
    for (uint32_t i = 0; i < nblobs; ++i) {
        const uint16_t nlen = r.u16();
        std::string name(reinterpret_cast<const char*>(r.take(nlen)), nlen);
        const uint64_t count = r.u64();
        const auto it = slots.find(name);
        if (it == slots.end()) throw FormatError("artifact: unknown weight blob " + name);
        if (it->second->size() != count)
            throw FormatError("artifact: size mismatch for blob " + name);
        for (uint64_t j = 0; j < count; ++j) (*it->second)[j] = r.f64();
        slots.erase(it);
    }
    if (!slots.empty()) throw FormatError("artifact: missing weight blobs");
    if (r.remaining() != 0) throw FormatError("artifact: trailing bytes");
    return art;
}

}  // namespace bcs
