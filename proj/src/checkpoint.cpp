#include "edgestereo/error.hpp"
#include "edgestereo/model.hpp"

#include <bit>
#include <cstring>

namespace edgestereo::model {

namespace {

constexpr char kMagic[4] = {'E', 'S', 'C', 'K'};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() { return *need(1); }
    std::uint32_t u32() {
        const std::uint8_t* p = need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        const std::uint8_t* p = need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
        return std::bit_cast<double>(v);
    }
    std::string str(std::size_t n) {
        const std::uint8_t* p = need(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    bool done() const { return pos_ == in_.size(); }

private:
    const std::uint8_t* need(std::size_t n) {
        if (in_.size() - pos_ < n) throw FormatError(FormatErrorKind::TruncatedPayload, "checkpoint is truncated");
        const std::uint8_t* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

void write_widths(Writer& w, const Widths& v) {
    for (int x : {v.stem_full, v.stem_half, v.edge, v.left_transform, v.edge_transform, v.encoder_quarter,
                  v.encoder_eighth, v.head, v.residual_full, v.residual_coarse}) {
        w.i32(x);
    }
}

Widths read_widths(Reader& r) {
    Widths v;
    for (int* x : {&v.stem_full, &v.stem_half, &v.edge, &v.left_transform, &v.edge_transform, &v.encoder_quarter,
                   &v.encoder_eighth, &v.head, &v.residual_full, &v.residual_coarse}) {
        *x = r.i32();
    }
    return v;
}

} // namespace

std::vector<std::uint8_t> save_checkpoint(const ModelParams& params, const PyramidConfig& cfg) {
    cfg.validate();
    Writer w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.i32(cfg.initial_scale);
    w.i32(cfg.num_scales);
    w.u32(static_cast<std::uint32_t>(cfg.per_scale_max_disp.size()));
    for (int d : cfg.per_scale_max_disp) w.i32(d);
    w.i32(cfg.matching_max_disp);
    w.u8(cfg.edge_embedding ? 1 : 0);
    w.i32(cfg.image_channels);
    write_widths(w, cfg.widths);
    w.u32(static_cast<std::uint32_t>(params.params.size()));
    for (const Param& p : params.params) {
        w.u32(static_cast<std::uint32_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.u8(static_cast<std::uint8_t>(p.group));
        w.i32(p.value.channels());
        w.i32(p.value.height());
        w.i32(p.value.width());
        for (double v : p.value.data()) w.f64(v);
    }
    return w.take();
}

std::pair<ModelParams, PyramidConfig> load_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError(FormatErrorKind::MalformedHeader, "not a checkpoint (bad magic)");
    }
    Reader r(bytes.subspan(4));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(FormatErrorKind::MalformedHeader, "unsupported checkpoint version " + std::to_string(version));
    }
    PyramidConfig cfg;
    cfg.initial_scale = r.i32();
    cfg.num_scales = r.i32();
    const std::uint32_t n_disp = r.u32();
    if (n_disp > 16) throw FormatError(FormatErrorKind::CorruptData, "implausible scale count in checkpoint");
    cfg.per_scale_max_disp.clear();
    for (std::uint32_t i = 0; i < n_disp; ++i) cfg.per_scale_max_disp.push_back(r.i32());
    cfg.matching_max_disp = r.i32();
    cfg.edge_embedding = r.u8() != 0;
    cfg.image_channels = r.i32();
    cfg.widths = read_widths(r);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw FormatError(FormatErrorKind::CorruptData, std::string("checkpoint config: ") + e.what());
    }

    ModelParams params;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32();
        if (len > 256) throw FormatError(FormatErrorKind::CorruptData, "implausible parameter name length");
        Param p;
        p.name = r.str(len);
        const std::uint8_t group = r.u8();
        if (group > 2) throw FormatError(FormatErrorKind::CorruptData, "unknown parameter group");
        p.group = static_cast<ParamGroup>(group);
        const int c = r.i32();
        const int h = r.i32();
        const int w = r.i32();
        if (c <= 0 || h <= 0 || w <= 0 || static_cast<long long>(c) * h * w > (1LL << 24)) {
            throw FormatError(FormatErrorKind::CorruptData, "bad shape for parameter " + p.name);
        }
        p.value = Grid(c, h, w);
        for (double& v : p.value.data()) v = r.f64();
        if (!p.value.all_finite()) throw FormatError(FormatErrorKind::CorruptData, "non-finite parameter " + p.name);
        params.params.push_back(std::move(p));
    }
    if (!r.done()) throw FormatError(FormatErrorKind::CorruptData, "trailing bytes after checkpoint");
    // The layout must match what the config would build.
    const ModelParams reference = init_params(cfg, 0);
    if (reference.params.size() != params.params.size()) {
        throw FormatError(FormatErrorKind::CorruptData, "checkpoint parameters do not match its config");
    }
    for (std::size_t i = 0; i < params.params.size(); ++i) {
        const Param& a = reference.params[i];
        const Param& b = params.params[i];
        if (a.name != b.name || a.group != b.group || !a.value.same_shape(b.value)) {
            throw FormatError(FormatErrorKind::CorruptData, "checkpoint parameter " + b.name + " does not match its config");
        }
    }
    return {std::move(params), std::move(cfg)};
}

} // namespace edgestereo::model
