#include "fcnseg/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "fcnseg/errors.hpp"
#include "fcnseg/layers.hpp"

namespace fcnseg {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::kAlexNet: return "fcn-alexnet";
        case Variant::k32s: return "fcn-32s";
        case Variant::k16s: return "fcn-16s";
        case Variant::k8s: return "fcn-8s";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    std::string s;
    for (char ch : name) {
        if (ch == '-' || ch == '_') continue;
        s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    if (s.rfind("fcn", 0) == 0) s = s.substr(3);
    if (s == "alexnet") return Variant::kAlexNet;
    if (s == "32s") return Variant::k32s;
    if (s == "16s") return Variant::k16s;
    if (s == "8s") return Variant::k8s;
    throw ConfigError("unknown FCN variant '" + std::string(name) + "'");
}

std::string_view to_string(NodeKind k) {
    switch (k) {
        case NodeKind::kInput: return "input";
        case NodeKind::kConv: return "conv";
        case NodeKind::kScore: return "score";
        case NodeKind::kMaxPool: return "pool";
        case NodeKind::kUpsample: return "upsample";
        case NodeKind::kCrop: return "crop";
        case NodeKind::kFuseSum: return "fuse-sum";
        case NodeKind::kDropout: return "dropout";
    }
    return "?";
}

namespace {

constexpr double kOffsetEps = 1e-9;

std::size_t scaled_width(int full, double width_scale) {
    return static_cast<std::size_t>(std::max<long>(4, std::lround(full * width_scale)));
}

// Graph construction with coordinate-map bookkeeping. Parameters are created
// with their shapes; values are drawn afterwards so that the first-layer pad
// search does not consume random numbers.
class GraphBuilder {
public:
    GraphBuilder(SegModel& m, bool allocate) : m_(m), allocate_(allocate) {}

    int input() {
        Node n;
        n.name = "data";
        n.kind = NodeKind::kInput;
        return push(std::move(n));
    }

    int conv(const std::string& name, int in, std::size_t out_ch, int k, int stride, int pad, bool relu,
             NodeKind kind = NodeKind::kConv, ParamInit init = ParamInit::kGaussian) {
        const std::size_t in_ch = channels_.at(static_cast<std::size_t>(in));
        Node n;
        n.name = name;
        n.kind = kind;
        n.inputs = {in};
        n.kernel = k;
        n.stride = stride;
        n.pad = pad;
        n.relu = relu;
        const double fan_in = static_cast<double>(in_ch) * k * k;
        const double std = init == ParamInit::kGaussian ? std::sqrt((relu ? 2.0 : 1.0) / fan_in) : 0.0;
        n.weight = add_param(name + ".weight", Shape{out_ch, in_ch, static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                             init, std);
        n.bias = add_param(name + ".bias", Shape{1, 1, 1, out_ch}, ParamInit::kZero, 0.0);
        place_strided(n, in, k, stride, pad);
        return push(std::move(n), out_ch);
    }

    int pool(const std::string& name, int in, int k, int stride) {
        Node n;
        n.name = name;
        n.kind = NodeKind::kMaxPool;
        n.inputs = {in};
        n.kernel = k;
        n.stride = stride;
        place_strided(n, in, k, stride, 0);
        return push(std::move(n), channels_.at(static_cast<std::size_t>(in)));
    }

    int dropout(const std::string& name, int in) {
        Node n;
        n.name = name;
        n.kind = NodeKind::kDropout;
        n.inputs = {in};
        inherit(n, in);
        return push(std::move(n), channels_.at(static_cast<std::size_t>(in)));
    }

    int upsample(const std::string& name, int in, int factor, bool trainable) {
        const std::size_t ch = channels_.at(static_cast<std::size_t>(in));
        const int k = UpsampleSpec::kernel_size_for(factor);
        Node n;
        n.name = name;
        n.kind = NodeKind::kUpsample;
        n.inputs = {in};
        n.kernel = k;
        n.stride = factor;
        n.pad = 0;
        n.weight = add_param(name + ".weight", Shape{ch, ch, static_cast<std::size_t>(k), static_cast<std::size_t>(k)},
                             ParamInit::kBilinear, 0.0);
        m_.params[static_cast<std::size_t>(n.weight)].trainable = trainable;
        const Node& p = m_.nodes.at(static_cast<std::size_t>(in));
        const double c = (k - 1) / 2.0 - n.pad;
        n.scale = p.scale / factor;
        n.shift = p.shift - p.scale * c / factor;
        return push(std::move(n), ch);
    }

    int crop(const std::string& name, int in, int reference, int offset) {
        Node n;
        n.name = name;
        n.kind = NodeKind::kCrop;
        n.inputs = {in};
        n.crop_reference = reference;
        n.crop_offset = offset;
        const Node& p = m_.nodes.at(static_cast<std::size_t>(in));
        n.scale = p.scale;
        n.shift = p.shift + p.scale * offset;
        return push(std::move(n), channels_.at(static_cast<std::size_t>(in)));
    }

    // Sum of two score maps; the one whose origin lies further out is cropped
    // onto the other using the offset implied by the coordinate maps.
    int fuse(const std::string& name, int a, int b) {
        const Node& na = m_.nodes.at(static_cast<std::size_t>(a));
        const Node& nb = m_.nodes.at(static_cast<std::size_t>(b));
        if (std::abs(na.scale - nb.scale) > kOffsetEps) {
            throw ConfigError("fuse '" + name + "': summands have different strides");
        }
        const double d = (nb.shift - na.shift) / na.scale;
        if (d >= -kOffsetEps) {
            a = crop(name + "_crop", a, b, static_cast<int>(std::lround(d)));
        } else {
            b = crop(name + "_crop", b, a, static_cast<int>(std::lround(-d)));
        }
        Node n;
        n.name = name;
        n.kind = NodeKind::kFuseSum;
        n.inputs = {a, b};
        inherit(n, b);
        return push(std::move(n), channels_.at(static_cast<std::size_t>(a)));
    }

    // Crop the final upsampled map onto the input image. Returns false when
    // the input origin falls before the map's first cell.
    bool crop_to_input(int in) {
        const Node& p = m_.nodes.at(static_cast<std::size_t>(in));
        const double d = -p.shift / p.scale;
        if (d < -0.5) return false;
        crop("score", in, -1, static_cast<int>(std::lround(std::max(0.0, d))));
        return true;
    }

private:
    int push(Node n, std::size_t channels = 3) {
        m_.nodes.push_back(std::move(n));
        channels_.push_back(channels);
        return static_cast<int>(m_.nodes.size() - 1);
    }

    int add_param(const std::string& name, Shape shape, ParamInit init, double std) {
        Parameter p;
        p.name = name;
        if (allocate_) p.value = Tensor(shape);
        p.init = init;
        p.init_std = std;
        m_.params.push_back(std::move(p));
        return static_cast<int>(m_.params.size() - 1);
    }

    void inherit(Node& n, int in) {
        const Node& p = m_.nodes.at(static_cast<std::size_t>(in));
        n.scale = p.scale;
        n.shift = p.shift;
    }

    void place_strided(Node& n, int in, int k, int stride, int pad) {
        const Node& p = m_.nodes.at(static_cast<std::size_t>(in));
        n.scale = p.scale * stride;
        n.shift = p.shift + p.scale * ((k - 1) / 2.0 - pad);
    }

    SegModel& m_;
    bool allocate_;
    std::vector<std::size_t> channels_;
};

// Layers of the two backbones, at full width.
struct VggBlock {
    int width;
    int convs;
};
constexpr VggBlock kVgg16[] = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
constexpr int kFcWidth = 4096;

bool build_topology(SegModel& m, int first_pad, bool allocate) {
    m.nodes.clear();
    m.params.clear();
    GraphBuilder g(m, allocate);
    const double ws = m.width_scale;
    const bool same = m.options.fc_padding == FcPadding::kSame;
    const bool up_trainable = !m.options.freeze_upsample;
    const auto classes = static_cast<std::size_t>(m.num_classes);

    int x = g.input();
    int pool3 = -1;
    int pool4 = -1;
    int fc_kernel = 7;

    if (m.variant == Variant::kAlexNet) {
        fc_kernel = 6;
        x = g.conv("conv1", x, scaled_width(96, ws), 11, 4, first_pad, true);
        x = g.pool("pool1", x, 3, 2);
        x = g.conv("conv2", x, scaled_width(256, ws), 5, 1, 2, true);
        x = g.pool("pool2", x, 3, 2);
        x = g.conv("conv3", x, scaled_width(384, ws), 3, 1, 1, true);
        x = g.conv("conv4", x, scaled_width(384, ws), 3, 1, 1, true);
        x = g.conv("conv5", x, scaled_width(256, ws), 3, 1, 1, true);
        x = g.pool("pool5", x, 3, 2);
    } else {
        for (int b = 0; b < 5; ++b) {
            for (int i = 0; i < kVgg16[b].convs; ++i) {
                const std::string name = "conv" + std::to_string(b + 1) + "_" + std::to_string(i + 1);
                const int pad = (b == 0 && i == 0) ? first_pad : 1;
                x = g.conv(name, x, scaled_width(kVgg16[b].width, ws), 3, 1, pad, true);
            }
            x = g.pool("pool" + std::to_string(b + 1), x, 2, 2);
            if (b == 2) pool3 = x;
            if (b == 3) pool4 = x;
        }
    }

    x = g.conv("fc6", x, scaled_width(kFcWidth, ws), fc_kernel, 1, same ? (fc_kernel - 1) / 2 : 0, true);
    if (m.options.dropout) x = g.dropout("drop6", x);
    x = g.conv("fc7", x, scaled_width(kFcWidth, ws), 1, 1, 0, true);
    if (m.options.dropout) x = g.dropout("drop7", x);
    x = g.conv("score_fr", x, classes, 1, 1, 0, false, NodeKind::kScore);

    switch (m.variant) {
        case Variant::kAlexNet:
        case Variant::k32s:
            x = g.upsample("upscore", x, 32, up_trainable);
            break;
        case Variant::k16s: {
            x = g.upsample("upscore2", x, 2, up_trainable);
            const int skip = g.conv("score_pool4", pool4, classes, 1, 1, 0, false, NodeKind::kScore, ParamInit::kZero);
            x = g.fuse("fuse_pool4", x, skip);
            x = g.upsample("upscore16", x, 16, up_trainable);
            break;
        }
        case Variant::k8s: {
            x = g.upsample("upscore2", x, 2, up_trainable);
            const int skip4 = g.conv("score_pool4", pool4, classes, 1, 1, 0, false, NodeKind::kScore, ParamInit::kZero);
            x = g.fuse("fuse_pool4", x, skip4);
            x = g.upsample("upscore_pool4", x, 2, up_trainable);
            const int skip3 = g.conv("score_pool3", pool3, classes, 1, 1, 0, false, NodeKind::kScore, ParamInit::kZero);
            x = g.fuse("fuse_pool3", x, skip3);
            x = g.upsample("upscore8", x, 8, up_trainable);
            break;
        }
    }
    return g.crop_to_input(x);
}

bool valid_for_small_inputs(const SegModel& m) {
    // Extents are checked over a full stride period above the minimum.
    for (std::size_t n = kMinInputExtent; n <= kMinInputExtent + 64; ++n) {
        try {
            const auto ext = propagate_extents(m, n, n);
            if (ext.back().first != n) return false;
        } catch (const ShapeError&) {
            return false;
        }
    }
    return true;
}

void draw_param(Parameter& p, std::uint64_t seed, std::size_t index) {
    switch (p.init) {
        case ParamInit::kZero:
            p.value.fill(0.0);
            break;
        case ParamInit::kBilinear:
            fill_bilinear(p.value);
            break;
        case ParamInit::kGaussian: {
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(index)};
            std::mt19937_64 rng(seq);
            std::normal_distribution<double> dist(0.0, p.init_std);
            for (double& v : p.value.data()) v = dist(rng);
            break;
        }
    }
}

void add_into(Tensor& dst, const Tensor& src) {
    if (dst.empty()) {
        dst = src;
        return;
    }
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void accumulate_grad(Parameter& p, std::span<const double> g) {
    p.value.ensure_grad();
    auto dst = p.value.grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace

int SegModel::find_node(std::string_view name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].name == name) return static_cast<int>(i);
    return -1;
}

int SegModel::find_param(std::string_view name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].name == name) return static_cast<int>(i);
    return -1;
}

std::size_t SegModel::count(NodeKind kind) const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [&](const Node& n) { return n.kind == kind; }));
}

std::size_t SegModel::parameter_count() const {
    std::size_t s = 0;
    for (const auto& p : params) s += p.value.size();
    return s;
}

int SegModel::prediction_stride() const {
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        if (it->kind == NodeKind::kUpsample) {
            return static_cast<int>(std::lround(nodes.at(static_cast<std::size_t>(it->inputs[0])).scale));
        }
    }
    return 1;
}

int SegModel::first_pad() const {
    for (const auto& n : nodes)
        if (n.kind == NodeKind::kConv) return n.pad;
    return 0;
}

void SegModel::reinitialize(std::size_t param_index) {
    draw_param(params.at(param_index), seed, param_index);
}

void SegModel::zero_grads() {
    for (auto& p : params) p.value.zero_grad();
}

SegModel build_model(Variant variant, int num_classes, double width_scale, std::uint64_t seed,
                     const ModelOptions& options) {
    if (!(width_scale > 0.0 && width_scale <= 1.0)) {
        throw ConfigError("width_scale must be in (0, 1], got " + std::to_string(width_scale));
    }
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2, got " + std::to_string(num_classes));
    if (options.dropout && !(options.dropout_rate > 0.0 && options.dropout_rate < 1.0)) {
        throw ConfigError("dropout_rate must be in (0, 1)");
    }
    SegModel m;
    m.variant = variant;
    m.num_classes = num_classes;
    m.width_scale = width_scale;
    m.seed = seed;
    m.options = options;

    // Smallest first-layer pad for which every layer runs and every crop has a
    // non-negative offset at all input sizes from the minimum upward.
    const int base_pad = variant == Variant::kAlexNet ? 5 : 1;
    int pad = base_pad;
    for (; pad <= 512; ++pad) {
        if (build_topology(m, pad, false) && valid_for_small_inputs(m)) break;
    }
    if (pad > 512) throw ConfigError("no first-layer padding makes the graph valid");
    build_topology(m, pad, true);

    for (std::size_t i = 0; i < m.params.size(); ++i) draw_param(m.params[i], seed, i);
    return m;
}

std::vector<std::pair<std::size_t, std::size_t>> propagate_extents(const SegModel& model, std::size_t height,
                                                                   std::size_t width) {
    std::vector<std::pair<std::size_t, std::size_t>> ext(model.nodes.size());
    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const Node& n = model.nodes[i];
        auto in = n.inputs.empty() ? std::pair<std::size_t, std::size_t>{height, width}
                                   : ext[static_cast<std::size_t>(n.inputs[0])];
        const auto k = static_cast<std::size_t>(n.kernel);
        const auto s = static_cast<std::size_t>(n.stride);
        const auto p = static_cast<std::size_t>(n.pad);
        switch (n.kind) {
            case NodeKind::kInput:
                ext[i] = {height, width};
                break;
            case NodeKind::kConv:
            case NodeKind::kScore:
                if (in.first + 2 * p < k || in.second + 2 * p < k) {
                    throw ShapeError("layer " + n.name + ": input " + std::to_string(in.first) + "x" +
                                     std::to_string(in.second) + " is smaller than its " + std::to_string(k) + "x" +
                                     std::to_string(k) + " kernel");
                }
                ext[i] = {conv_out_extent(in.first, k, s, p), conv_out_extent(in.second, k, s, p)};
                break;
            case NodeKind::kMaxPool:
                if (in.first < k || in.second < k) {
                    throw ShapeError("layer " + n.name + ": input " + std::to_string(in.first) + "x" +
                                     std::to_string(in.second) + " is smaller than its pooling window");
                }
                ext[i] = {pool_out_extent(in.first, k, s), pool_out_extent(in.second, k, s)};
                break;
            case NodeKind::kUpsample:
                ext[i] = {deconv_out_extent(in.first, k, s, p), deconv_out_extent(in.second, k, s, p)};
                break;
            case NodeKind::kCrop: {
                const auto target = n.crop_reference < 0 ? std::pair<std::size_t, std::size_t>{height, width}
                                                         : ext[static_cast<std::size_t>(n.crop_reference)];
                const auto off = static_cast<std::size_t>(n.crop_offset);
                if (off + target.first > in.first || off + target.second > in.second) {
                    throw ShapeError("layer " + n.name + ": cannot crop " + std::to_string(target.first) + "x" +
                                     std::to_string(target.second) + " at offset " + std::to_string(off) + " from " +
                                     std::to_string(in.first) + "x" + std::to_string(in.second));
                }
                ext[i] = target;
                break;
            }
            case NodeKind::kFuseSum: {
                const auto b = ext[static_cast<std::size_t>(n.inputs[1])];
                if (b != in) throw ShapeError("layer " + n.name + ": summand extents differ");
                ext[i] = in;
                break;
            }
            case NodeKind::kDropout:
                ext[i] = in;
                break;
        }
    }
    return ext;
}

ForwardCache forward_cached(const SegModel& model, const Tensor& image, const ForwardOptions& opts) {
    const Shape s = image.shape();
    if (s.c != 3) throw ShapeError("forward: image " + s.to_string() + " must have 3 channels");
    if (s.h < kMinInputExtent || s.w < kMinInputExtent) {
        throw ShapeError("forward: input " + s.to_string() + " is below the minimum extent " +
                         std::to_string(kMinInputExtent) + "x" + std::to_string(kMinInputExtent));
    }
    propagate_extents(model, s.h, s.w);

    const std::size_t count = model.nodes.size();
    ForwardCache cache;
    cache.outputs.resize(count);
    cache.argmax.resize(count);
    cache.masks.resize(count);
    cache.muted.assign(count, false);
    for (const auto& name : opts.muted) {
        const int idx = model.find_node(name);
        if (idx < 0) throw ConfigError("forward: no node named '" + name + "' to mute");
        cache.muted[static_cast<std::size_t>(idx)] = true;
    }

    for (std::size_t i = 0; i < count; ++i) {
        const Node& n = model.nodes[i];
        Tensor out;
        const Tensor* in = n.inputs.empty() ? nullptr : &cache.outputs[static_cast<std::size_t>(n.inputs[0])];
        switch (n.kind) {
            case NodeKind::kInput:
                out = image;
                break;
            case NodeKind::kConv:
            case NodeKind::kScore: {
                const auto& w = model.params[static_cast<std::size_t>(n.weight)].value;
                const auto& b = model.params[static_cast<std::size_t>(n.bias)].value;
                out = conv2d_forward(*in, w, b.data(), n.stride, n.pad);
                if (n.relu) relu_inplace(out);
                break;
            }
            case NodeKind::kMaxPool: {
                auto r = maxpool2d_forward(*in, n.kernel, n.stride);
                out = std::move(r.output);
                cache.argmax[i] = std::move(r.argmax);
                break;
            }
            case NodeKind::kUpsample:
                out = deconv2d_forward(*in, model.params[static_cast<std::size_t>(n.weight)].value, n.stride, n.pad);
                break;
            case NodeKind::kCrop: {
                const Shape ref = n.crop_reference < 0 ? s : cache.outputs[static_cast<std::size_t>(n.crop_reference)].shape();
                out = crop_center(*in, ref.h, ref.w, static_cast<std::size_t>(n.crop_offset));
                break;
            }
            case NodeKind::kFuseSum: {
                out = *in;
                const Tensor& other = cache.outputs[static_cast<std::size_t>(n.inputs[1])];
                if (other.shape() != out.shape()) {
                    throw ShapeError("fuse " + n.name + ": " + out.shape().to_string() + " vs " + other.shape().to_string());
                }
                auto d = out.data();
                auto o = other.data();
                for (std::size_t j = 0; j < d.size(); ++j) d[j] += o[j];
                break;
            }
            case NodeKind::kDropout: {
                out = *in;
                if (opts.training && model.options.dropout) {
                    std::seed_seq seq{static_cast<std::uint32_t>(opts.dropout_seed),
                                      static_cast<std::uint32_t>(opts.dropout_seed >> 32), static_cast<std::uint32_t>(i)};
                    std::mt19937_64 rng(seq);
                    std::bernoulli_distribution keep(1.0 - model.options.dropout_rate);
                    const double scale = 1.0 / (1.0 - model.options.dropout_rate);
                    auto& mask = cache.masks[i];
                    mask.resize(out.size());
                    auto d = out.data();
                    for (std::size_t j = 0; j < d.size(); ++j) {
                        mask[j] = keep(rng) ? 1 : 0;
                        d[j] = mask[j] ? d[j] * scale : 0.0;
                    }
                }
                break;
            }
        }
        if (cache.muted[i]) out.fill(0.0);
        cache.outputs[i] = std::move(out);
    }
    return cache;
}

Tensor forward(const SegModel& model, const Tensor& image, const ForwardOptions& opts) {
    auto cache = forward_cached(model, image, opts);
    return std::move(cache.outputs.back());
}

void backward(SegModel& model, const ForwardCache& cache, const Tensor& score_grad) {
    const std::size_t count = model.nodes.size();
    if (cache.outputs.size() != count) throw ShapeError("backward: cache does not belong to this model");
    if (score_grad.shape() != cache.scores().shape()) {
        throw ShapeError("backward: score gradient " + score_grad.shape().to_string() + " vs scores " +
                         cache.scores().shape().to_string());
    }
    std::vector<Tensor> grads(count);
    grads.back() = score_grad;

    for (std::size_t ii = count; ii-- > 1;) {
        const Node& n = model.nodes[ii];
        Tensor g = std::move(grads[ii]);
        grads[ii] = Tensor();
        if (g.empty() || cache.muted[ii]) continue;
        const auto src = n.inputs.empty() ? 0u : static_cast<std::size_t>(n.inputs[0]);
        const bool input_needs_grad = model.nodes[src].kind != NodeKind::kInput;

        switch (n.kind) {
            case NodeKind::kInput:
                break;
            case NodeKind::kConv:
            case NodeKind::kScore: {
                if (n.relu) relu_backward_inplace(cache.outputs[ii], g);
                Parameter& w = model.params[static_cast<std::size_t>(n.weight)];
                Parameter& b = model.params[static_cast<std::size_t>(n.bias)];
                unsigned which = input_needs_grad ? kGradInput : 0u;
                if (w.trainable) which |= kGradKernel;
                if (b.trainable) which |= kGradBias;
                if (which == 0) break;
                auto r = conv2d_backward(cache.outputs[src], w.value, n.stride, n.pad, g, which);
                if (which & kGradKernel) accumulate_grad(w, r.kernel_grad.data());
                if (which & kGradBias) accumulate_grad(b, r.bias_grad);
                if (input_needs_grad) add_into(grads[src], r.input_grad);
                break;
            }
            case NodeKind::kMaxPool:
                if (input_needs_grad) add_into(grads[src], maxpool2d_backward(cache.outputs[src].shape(), cache.argmax[ii], g));
                break;
            case NodeKind::kUpsample: {
                Parameter& w = model.params[static_cast<std::size_t>(n.weight)];
                auto r = deconv2d_backward(cache.outputs[src], w.value, n.stride, n.pad, g, w.trainable);
                if (w.trainable) accumulate_grad(w, r.kernel_grad.data());
                add_into(grads[src], r.input_grad);
                break;
            }
            case NodeKind::kCrop:
                add_into(grads[src], crop_backward(cache.outputs[src].shape(), static_cast<std::size_t>(n.crop_offset), g));
                break;
            case NodeKind::kFuseSum:
                add_into(grads[static_cast<std::size_t>(n.inputs[1])], g);
                add_into(grads[src], g);
                break;
            case NodeKind::kDropout: {
                const auto& mask = cache.masks[ii];
                if (!mask.empty()) {
                    const double scale = 1.0 / (1.0 - model.options.dropout_rate);
                    auto d = g.data();
                    for (std::size_t j = 0; j < d.size(); ++j) d[j] = mask[j] ? d[j] * scale : 0.0;
                }
                add_into(grads[src], g);
                break;
            }
        }
    }
}

LabelImage predict_labels(const Tensor& score_map) {
    const Shape s = score_map.shape();
    if (s.n != 1) throw ShapeError("predict_labels: expects a single-item score map, got " + s.to_string());
    LabelImage out(static_cast<int>(s.w), static_cast<int>(s.h));
    const std::size_t plane = s.plane();
    const double* d = score_map.data().data();
    for (std::size_t p = 0; p < plane; ++p) {
        std::size_t best = 0;
        double best_v = d[p];
        for (std::size_t c = 1; c < s.c; ++c) {
            if (d[c * plane + p] > best_v) {
                best_v = d[c * plane + p];
                best = c;
            }
        }
        out.pixels[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

}  // namespace fcnseg
