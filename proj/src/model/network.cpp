#include "wss/model/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>

#include "wss/core/random.hpp"

namespace wss {

namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

constexpr const char* kTrunkNames[6] = {"stem", "down1", "down2", "block4", "block5", "block6"};
constexpr int kTrunkStride[6] = {2, 2, 2, 1, 1, 1};
constexpr int kTrunkDilation[6] = {1, 1, 1, 1, 2, 2};
// The multi-label branch reads the output of trunk layer index 2 (second downsampling block).
constexpr int kForkLayer = 2;

std::string kind_name(BackboneKind kind) { return kind == BackboneKind::toy ? "toy" : "dilated-resnet-contract"; }

}  // namespace

Tensor::Tensor(std::vector<int> s, float fill) : shape(std::move(s)), values(numel(), fill) {}

std::size_t Tensor::numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

std::string ArchitectureSpec::id() const {
    std::ostringstream os;
    os << kind_name(kind) << ";classes=" << num_classes << ";dual=" << (dual_branch ? 1 : 0)
       << ";head=" << branch_head_convs;
    if (kind == BackboneKind::toy) {
        os << ";widths=";
        for (std::size_t i = 0; i < widths.size(); ++i) os << (i ? "," : "") << widths[i];
    }
    return os.str();
}

ArchitectureSpec ArchitectureSpec::parse(const std::string& id) {
    ArchitectureSpec spec;
    std::stringstream ss(id);
    std::string part;
    bool first = true;
    while (std::getline(ss, part, ';')) {
        if (first) {
            if (part == "toy") spec.kind = BackboneKind::toy;
            else if (part == "dilated-resnet-contract") spec.kind = BackboneKind::dilated_resnet_contract;
            else throw std::invalid_argument("unknown architecture \"" + part + "\"");
            first = false;
            continue;
        }
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("malformed architecture id \"" + id + "\"");
        const auto key = part.substr(0, eq);
        const auto value = part.substr(eq + 1);
        if (key == "classes") spec.num_classes = std::stoi(value);
        else if (key == "dual") spec.dual_branch = value == "1";
        else if (key == "head") spec.branch_head_convs = std::stoi(value);
        else if (key == "widths") {
            std::stringstream ws(value);
            std::string w;
            for (auto& width : spec.widths) {
                if (!std::getline(ws, w, ',')) throw std::invalid_argument("architecture widths need 6 values");
                width = std::stoi(w);
            }
        } else {
            throw std::invalid_argument("unknown architecture key \"" + key + "\"");
        }
    }
    if (first) throw std::invalid_argument("empty architecture id");
    if (spec.num_classes < 2) throw std::invalid_argument("architecture needs at least 2 classes");
    return spec;
}

std::vector<std::pair<std::string, std::vector<int>>> ArchitectureSpec::tensor_shapes() const {
    std::vector<std::pair<std::string, std::vector<int>>> out;
    auto conv = [&](const std::string& name, int cout, int cin, int k) {
        out.emplace_back(name + ".weight", std::vector<int>{cout, cin, k, k});
        out.emplace_back(name + ".bias", std::vector<int>{cout});
    };
    int fork_width = 0;
    int final_width = 0;
    if (kind == BackboneKind::toy) {
        int cin = 3;
        for (int i = 0; i < 6; ++i) {
            conv(kTrunkNames[i], widths[static_cast<std::size_t>(i)], cin, 3);
            cin = widths[static_cast<std::size_t>(i)];
        }
        fork_width = widths[kForkLayer];
        final_width = widths[5];
    } else {
        // ResNet50 bottleneck layout with dilation in the last two stages (declaration only).
        auto bn = [&](const std::string& name, int c) {
            for (const char* t : {".gamma", ".beta", ".running_mean", ".running_var"})
                out.emplace_back(name + t, std::vector<int>{c});
        };
        out.emplace_back("conv1.weight", std::vector<int>{64, 3, 7, 7});
        bn("bn1", 64);
        const int blocks[4] = {3, 4, 6, 3};
        const int planes[4] = {64, 128, 256, 512};
        int in = 64;
        for (int s = 0; s < 4; ++s) {
            for (int b = 0; b < blocks[s]; ++b) {
                const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(b);
                const int w = planes[s];
                out.emplace_back(p + ".conv1.weight", std::vector<int>{w, in, 1, 1});
                bn(p + ".bn1", w);
                out.emplace_back(p + ".conv2.weight", std::vector<int>{w, w, 3, 3});
                bn(p + ".bn2", w);
                out.emplace_back(p + ".conv3.weight", std::vector<int>{4 * w, w, 1, 1});
                bn(p + ".bn3", 4 * w);
                if (b == 0) {
                    out.emplace_back(p + ".downsample.weight", std::vector<int>{4 * w, in, 1, 1});
                    bn(p + ".downsample.bn", 4 * w);
                }
                in = 4 * w;
            }
        }
        fork_width = 512;  // output of layer2
        final_width = in;
    }
    conv("classifier", num_classes, final_width, 1);
    if (dual_branch) {
        for (int i = 0; i < branch_head_convs; ++i) conv("branch.conv" + std::to_string(i + 1), fork_width, fork_width, 3);
        out.emplace_back("branch.fc.weight", std::vector<int>{num_classes, fork_width});
        out.emplace_back("branch.fc.bias", std::vector<int>{num_classes});
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : tensors) n += t.numel();
    return n;
}

bool NetworkParams::materialized() const {
    for (const auto& [name, t] : tensors)
        if (t.values.size() != t.numel()) return false;
    return !tensors.empty();
}

NetworkParams build_backbone(BackboneKind kind, int num_classes, bool dual_branch, std::uint64_t rng_seed,
                             int branch_head_convs) {
    if (num_classes < 2) throw std::invalid_argument("backbone needs C >= 2, got " + std::to_string(num_classes));
    if (branch_head_convs < 0) throw std::invalid_argument("branch_head_convs must be >= 0");
    ArchitectureSpec spec;
    spec.kind = kind;
    spec.num_classes = num_classes;
    spec.dual_branch = dual_branch;
    spec.branch_head_convs = branch_head_convs;
    NetworkParams params;
    params.architecture_id = spec.id();
    for (auto& [name, shape] : spec.tensor_shapes()) {
        Tensor t;
        t.shape = shape;
        if (kind == BackboneKind::toy) {
            t.values.assign(t.numel(), 0.0f);
            if (shape.size() > 1) {
                std::size_t fan_in = 1;
                for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= static_cast<std::size_t>(shape[d]);
                const bool linear_out = name.starts_with("classifier") || name.starts_with("branch.fc");
                const double stddev = std::sqrt((linear_out ? 1.0 : 2.0) / static_cast<double>(fan_in));
                Rng rng(derive_seed(rng_seed, std::string_view(name)));
                for (std::size_t i = 0; i < t.values.size(); i += 2) {
                    // Box-Muller, two normals per pair of uniforms
                    const double u1 = 1.0 - uniform_real(rng);
                    const double u2 = uniform_real(rng);
                    const double r = std::sqrt(-2.0 * std::log(u1));
                    t.values[i] = static_cast<float>(stddev * r * std::cos(2 * M_PI * u2));
                    if (i + 1 < t.values.size()) t.values[i + 1] = static_cast<float>(stddev * r * std::sin(2 * M_PI * u2));
                }
            }
        }
        params.tensors.emplace(name, std::move(t));
    }
    return params;
}

TensorSet zeros_like(const TensorSet& tensors) {
    TensorSet out;
    for (const auto& [name, t] : tensors) out.emplace(name, Tensor(t.shape));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Convolution engine

namespace {

struct ConvGeom {
    int cin, cout, k, stride, dilation, pad;
    int in_h, in_w, out_h, out_w;

    int kdim() const { return cin * k * k; }
    int out_pixels() const { return out_h * out_w; }
};

ConvGeom make_geom(int cin, int cout, int k, int stride, int dilation, int in_h, int in_w) {
    ConvGeom g{cin, cout, k, stride, dilation, dilation * (k / 2), in_h, in_w, 0, 0};
    g.out_h = (in_h + 2 * g.pad - dilation * (k - 1) - 1) / stride + 1;
    g.out_w = (in_w + 2 * g.pad - dilation * (k - 1) - 1) / stride + 1;
    return g;
}

inline int wrap_index(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

void im2col(const float* in, const ConvGeom& g, PaddingMode padding, std::vector<float>& col) {
    col.assign(static_cast<std::size_t>(g.kdim()) * static_cast<std::size_t>(g.out_pixels()), 0.0f);
    float* dst = col.data();
    for (int c = 0; c < g.cin; ++c) {
        const float* plane = in + static_cast<std::size_t>(c) * g.in_h * g.in_w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx, dst += g.out_pixels()) {
                for (int oy = 0; oy < g.out_h; ++oy) {
                    int iy = oy * g.stride - g.pad + ky * g.dilation;
                    if (iy < 0 || iy >= g.in_h) {
                        if (padding == PaddingMode::zeros) continue;
                        iy = wrap_index(iy, g.in_h);
                    }
                    float* row = dst + oy * g.out_w;
                    const float* src = plane + static_cast<std::size_t>(iy) * g.in_w;
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        int ix = ox * g.stride - g.pad + kx * g.dilation;
                        if (ix < 0 || ix >= g.in_w) {
                            if (padding == PaddingMode::zeros) continue;
                            ix = wrap_index(ix, g.in_w);
                        }
                        row[ox] = src[ix];
                    }
                }
            }
        }
    }
}

void col2im(const float* col, const ConvGeom& g, PaddingMode padding, float* din) {
    const float* srcp = col;
    for (int c = 0; c < g.cin; ++c) {
        float* plane = din + static_cast<std::size_t>(c) * g.in_h * g.in_w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx, srcp += g.out_pixels()) {
                for (int oy = 0; oy < g.out_h; ++oy) {
                    int iy = oy * g.stride - g.pad + ky * g.dilation;
                    if (iy < 0 || iy >= g.in_h) {
                        if (padding == PaddingMode::zeros) continue;
                        iy = wrap_index(iy, g.in_h);
                    }
                    const float* row = srcp + oy * g.out_w;
                    float* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        int ix = ox * g.stride - g.pad + kx * g.dilation;
                        if (ix < 0 || ix >= g.in_w) {
                            if (padding == PaddingMode::zeros) continue;
                            ix = wrap_index(ix, g.in_w);
                        }
                        dst[ix] += row[ox];
                    }
                }
            }
        }
    }
}

struct LayerRecord {
    std::string name;
    ConvGeom geom;
    bool relu = true;
    std::vector<float> col;     // im2col of the input (empty for 1x1 stride 1: input reused)
    std::vector<float> input;   // kept for 1x1 layers
    std::vector<float> output;  // post-activation
};

const Tensor& tensor(const NetworkParams& p, const std::string& name) {
    const auto it = p.tensors.find(name);
    if (it == p.tensors.end()) throw std::invalid_argument("missing parameter tensor " + name);
    if (it->second.values.size() != it->second.numel())
        throw std::logic_error("parameter tensor " + name + " has no weights loaded");
    return it->second;
}

void conv_forward(const NetworkParams& params, LayerRecord& layer, const std::vector<float>& in, PaddingMode padding) {
    const auto& g = layer.geom;
    const auto& w = tensor(params, layer.name + ".weight");
    const auto& b = tensor(params, layer.name + ".bias");
    layer.output.resize(static_cast<std::size_t>(g.cout) * g.out_pixels());
    CMapR W(w.values.data(), g.cout, g.kdim());
    MapR out(layer.output.data(), g.cout, g.out_pixels());
    if (g.k == 1 && g.stride == 1) {
        layer.input = in;
        out.noalias() = W * CMapR(layer.input.data(), g.kdim(), g.out_pixels());
    } else {
        im2col(in.data(), g, padding, layer.col);
        out.noalias() = W * CMapR(layer.col.data(), g.kdim(), g.out_pixels());
    }
    out.colwise() += Eigen::Map<const Eigen::VectorXf>(b.values.data(), g.cout);
    if (layer.relu) out = out.cwiseMax(0.0f);
}

/// `dout` is the gradient w.r.t. the layer output (post-activation); consumed in place.
void conv_backward(const NetworkParams& params, const LayerRecord& layer, std::vector<float>& dout, PaddingMode padding,
                   TensorSet& grads, std::vector<float>* din) {
    const auto& g = layer.geom;
    if (layer.relu)
        for (std::size_t i = 0; i < dout.size(); ++i)
            if (layer.output[i] <= 0.0f) dout[i] = 0.0f;
    MapR dO(dout.data(), g.cout, g.out_pixels());
    const float* colp = (g.k == 1 && g.stride == 1) ? layer.input.data() : layer.col.data();
    CMapR col(colp, g.kdim(), g.out_pixels());
    auto& gw = grads.at(layer.name + ".weight");
    auto& gb = grads.at(layer.name + ".bias");
    MapR(gw.values.data(), g.cout, g.kdim()).noalias() += dO * col.transpose();
    // Plain loop: Eigen's vectorised redux depends on buffer alignment, which would make the
    // result vary with the allocating thread.
    for (int o = 0; o < g.cout; ++o) {
        const float* row = dout.data() + static_cast<std::size_t>(o) * g.out_pixels();
        double s = 0.0;
        for (int p = 0; p < g.out_pixels(); ++p) s += row[p];
        gb.values[static_cast<std::size_t>(o)] += static_cast<float>(s);
    }
    if (!din) return;
    const auto& w = tensor(params, layer.name + ".weight");
    CMapR W(w.values.data(), g.cout, g.kdim());
    din->assign(static_cast<std::size_t>(g.cin) * g.in_h * g.in_w, 0.0f);
    if (g.k == 1 && g.stride == 1) {
        MapR(din->data(), g.kdim(), g.out_pixels()).noalias() = W.transpose() * dO;
    } else {
        MatR dcol = W.transpose() * dO;
        col2im(dcol.data(), g, padding, din->data());
    }
}

void check_input(const NetworkParams& params, int h, int w) {
    if (h < kMinInputSize || w < kMinInputSize)
        throw std::invalid_argument("input " + std::to_string(h) + "x" + std::to_string(w) + " below network minimum " +
                                    std::to_string(kMinInputSize));
    if (params.architecture().kind != BackboneKind::toy)
        throw std::logic_error("the reference engine only runs the toy backbone; " + params.architecture_id +
                               " is a contract declaration");
}

std::vector<float> preprocess(const RgbImage& image, const NetworkParams& params) {
    const std::size_t hw = image.pixel_count();
    std::vector<float> x(3 * hw);
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t c = 0; c < 3; ++c)
            x[c * hw + p] = (static_cast<float>(image.data[p * 3 + c]) - params.input_mean[c]) * kInputScale;
    return x;
}

}  // namespace

struct ForwardCache {
    PaddingMode padding = PaddingMode::zeros;
    std::vector<LayerRecord> trunk;   // six blocks + classifier
    std::vector<LayerRecord> branch;  // head convolutions
    std::vector<float> pooled;        // branch GAP output
    int branch_pixels = 0;
};

namespace {

void run_trunk(const RgbImage& image, const NetworkParams& params, const ArchitectureSpec& spec, ForwardCache& cache,
               bool with_branch) {
    std::vector<float> x = preprocess(image, params);
    int h = image.height, w = image.width, c = 3;
    cache.trunk.clear();
    cache.trunk.reserve(7);
    for (int i = 0; i < 6; ++i) {
        LayerRecord layer;
        layer.name = kTrunkNames[i];
        const int cout = spec.widths[static_cast<std::size_t>(i)];
        layer.geom = make_geom(c, cout, 3, kTrunkStride[i], kTrunkDilation[i], h, w);
        conv_forward(params, layer, i == 0 ? x : cache.trunk.back().output, cache.padding);
        h = layer.geom.out_h;
        w = layer.geom.out_w;
        c = cout;
        cache.trunk.push_back(std::move(layer));
    }
    LayerRecord cls;
    cls.name = "classifier";
    cls.relu = false;
    cls.geom = make_geom(c, spec.num_classes, 1, 1, 1, h, w);
    conv_forward(params, cls, cache.trunk.back().output, cache.padding);
    cache.trunk.push_back(std::move(cls));

    if (!with_branch) return;
    const auto& fork = cache.trunk[kForkLayer];
    int bh = fork.geom.out_h, bw = fork.geom.out_w, bc = fork.geom.cout;
    cache.branch.clear();
    for (int i = 0; i < spec.branch_head_convs; ++i) {
        LayerRecord layer;
        layer.name = "branch.conv" + std::to_string(i + 1);
        layer.geom = make_geom(bc, bc, 3, 1, 1, bh, bw);
        conv_forward(params, layer, i == 0 ? fork.output : cache.branch.back().output, cache.padding);
        cache.branch.push_back(std::move(layer));
    }
    const auto& feat = cache.branch.empty() ? fork.output : cache.branch.back().output;
    cache.branch_pixels = bh * bw;
    cache.pooled.assign(static_cast<std::size_t>(bc), 0.0f);
    for (int ch = 0; ch < bc; ++ch) {
        double s = 0.0;
        const float* plane = feat.data() + static_cast<std::size_t>(ch) * cache.branch_pixels;
        for (int p = 0; p < cache.branch_pixels; ++p) s += plane[p];
        cache.pooled[static_cast<std::size_t>(ch)] = static_cast<float>(s / cache.branch_pixels);
    }
}

ScoreMap logits_from_cache(const ForwardCache& cache, int classes) {
    const auto& cls = cache.trunk.back();
    const int h = cls.geom.out_h, w = cls.geom.out_w;
    ScoreMap out(h, w, classes, ScoreSpace::logits);
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < hw; ++p)
        for (int c = 0; c < classes; ++c)
            out.data[p * static_cast<std::size_t>(classes) + static_cast<std::size_t>(c)] =
                cls.output[static_cast<std::size_t>(c) * hw + p];
    return out;
}

MultiLabelScores multilabel_from_cache(const ForwardCache& cache, const NetworkParams& params, int classes) {
    const auto& w = tensor(params, "branch.fc.weight");
    const auto& b = tensor(params, "branch.fc.bias");
    const int d = static_cast<int>(cache.pooled.size());
    MultiLabelScores out;
    out.p.resize(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
        double s = b.values[static_cast<std::size_t>(c)];
        for (int k = 0; k < d; ++k)
            s += static_cast<double>(w.values[static_cast<std::size_t>(c * d + k)]) * cache.pooled[static_cast<std::size_t>(k)];
        out.p[static_cast<std::size_t>(c)] = s;
    }
    return out;
}

}  // namespace

ScoreMap forward_segmentation(const RgbImage& image, const NetworkParams& params, const ForwardOptions& options) {
    check_input(params, image.height, image.width);
    const auto spec = params.architecture();
    ForwardCache cache;
    cache.padding = options.padding;
    run_trunk(image, params, spec, cache, false);
    return logits_from_cache(cache, spec.num_classes);
}

ScoreMap forward_segmentation(const ImageRecord& image, const NetworkParams& params, const ForwardOptions& options) {
    return forward_segmentation(image.pixels, params, options);
}

MultiLabelScores forward_multilabel(const ImageRecord& image, const NetworkParams& params, const ForwardOptions& options) {
    const auto spec = params.architecture();
    if (!spec.dual_branch) throw std::logic_error("forward_multilabel on single-branch architecture " + params.architecture_id);
    check_input(params, image.height(), image.width());
    ForwardCache cache;
    cache.padding = options.padding;
    run_trunk(image.pixels, params, spec, cache, true);
    return multilabel_from_cache(cache, params, spec.num_classes);
}

TrainingForward forward_train(const RgbImage& image, const NetworkParams& params, bool with_branch,
                              const ForwardOptions& options) {
    check_input(params, image.height, image.width);
    const auto spec = params.architecture();
    if (with_branch && !spec.dual_branch)
        throw std::logic_error("multi-label branch requested on single-branch architecture " + params.architecture_id);
    TrainingForward out;
    out.cache = std::make_shared<ForwardCache>();
    out.cache->padding = options.padding;
    run_trunk(image, params, spec, *out.cache, with_branch);
    out.logits = logits_from_cache(*out.cache, spec.num_classes);
    if (with_branch) out.multilabel = multilabel_from_cache(*out.cache, params, spec.num_classes);
    return out;
}

void backward(const TrainingForward& pass, const NetworkParams& params, const ScoreMap& dlogits,
              const std::vector<double>* dmultilabel, bool detach_branch, TensorSet& grads) {
    const auto& cache = *pass.cache;
    for (const auto& [name, t] : params.tensors)
        if (!grads.contains(name)) grads.emplace(name, Tensor(t.shape));

    const auto& cls = cache.trunk.back();
    if (dlogits.height != cls.geom.out_h || dlogits.width != cls.geom.out_w || dlogits.classes != cls.geom.cout)
        throw std::invalid_argument("logit gradient shape mismatch");
    const std::size_t hw = dlogits.spatial_size();
    const auto C = static_cast<std::size_t>(dlogits.classes);
    std::vector<float> grad(C * hw);
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t c = 0; c < C; ++c) grad[c * hw + p] = static_cast<float>(dlogits.data[p * C + c]);

    // Branch first so its contribution to the fork activation can be merged into the trunk pass.
    std::vector<float> fork_grad;
    if (dmultilabel && pass.multilabel) {
        const auto& fcw = tensor(params, "branch.fc.weight");
        const int d = static_cast<int>(cache.pooled.size());
        auto& gw = grads.at("branch.fc.weight");
        auto& gb = grads.at("branch.fc.bias");
        std::vector<float> dpooled(static_cast<std::size_t>(d), 0.0f);
        for (std::size_t c = 0; c < C; ++c) {
            const auto g = static_cast<float>((*dmultilabel)[c]);
            gb.values[c] += g;
            for (int k = 0; k < d; ++k) {
                gw.values[c * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] += g * cache.pooled[static_cast<std::size_t>(k)];
                dpooled[static_cast<std::size_t>(k)] += g * fcw.values[c * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
            }
        }
        std::vector<float> dfeat(static_cast<std::size_t>(d) * cache.branch_pixels);
        for (int k = 0; k < d; ++k) {
            const float v = dpooled[static_cast<std::size_t>(k)] / static_cast<float>(cache.branch_pixels);
            std::fill_n(dfeat.begin() + static_cast<std::ptrdiff_t>(k) * cache.branch_pixels, cache.branch_pixels, v);
        }
        for (int i = static_cast<int>(cache.branch.size()) - 1; i >= 0; --i) {
            const bool need_input = i > 0 || !detach_branch;
            std::vector<float> dprev;
            conv_backward(params, cache.branch[static_cast<std::size_t>(i)], dfeat, cache.padding, grads,
                          need_input ? &dprev : nullptr);
            dfeat = std::move(dprev);
        }
        if (!detach_branch) fork_grad = std::move(dfeat);
    }

    for (int i = static_cast<int>(cache.trunk.size()) - 1; i >= 0; --i) {
        if (i == kForkLayer && !fork_grad.empty())
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += fork_grad[k];
        std::vector<float> dprev;
        conv_backward(params, cache.trunk[static_cast<std::size_t>(i)], grad, cache.padding, grads, i > 0 ? &dprev : nullptr);
        grad = std::move(dprev);
    }
}

}  // namespace wss
