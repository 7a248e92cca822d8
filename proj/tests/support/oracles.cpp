#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spdnn::oracle {

namespace {

struct Flow {
    int pool = 1;
    int depth = 0;
};

int pick(std::mt19937_64& gen, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(gen);
}

bool coin(std::mt19937_64& gen, double p) {
    return std::bernoulli_distribution(p)(gen);
}

} // namespace

std::map<std::string, std::string> oracle_labels(const NetworkTopology& net) {
    std::map<std::string, Flow> flow{{std::string(kInputId), {}}};
    std::map<std::string, std::string> labels;
    // Nodes may be listed in any order; sweep until everything is resolved.
    std::size_t resolved = 0;
    while (resolved < net.nodes.size()) {
        const auto before = resolved;
        for (const auto& n : net.nodes) {
            if (flow.count(n.id)) continue;
            bool ready = true;
            for (const auto& in : n.inputs) ready = ready && flow.count(in);
            if (!ready) continue;
            std::vector<Flow> ins;
            for (const auto& in : n.inputs) ins.push_back(flow.at(in));
            Flow f = ins.front();
            for (const auto& x : ins) f.depth = std::max(f.depth, x.depth);
            if (const auto* c = std::get_if<ConvSpec>(&n.spec)) {
                f.depth += 1;
                labels[n.id] = std::to_string(c->kernel) + "C" +
                               (f.pool > 1 ? std::to_string(f.pool) + "P" : "") + "," +
                               std::to_string(f.depth);
            } else if (const auto* d = std::get_if<DenseSpec>(&n.spec)) {
                f.depth += 1;
                f.pool = 1;
                labels[n.id] = std::to_string(d->units) + "F," + std::to_string(f.depth);
            } else if (const auto* p = std::get_if<MaxPoolSpec>(&n.spec)) {
                f.pool *= p->factor;
            } else if (const auto* u = std::get_if<UnpoolSpec>(&n.spec)) {
                f.pool /= u->factor;
            } else if (const auto* r = std::get_if<ReshapeSpec>(&n.spec)) {
                f.pool = static_cast<int>(net.input.height / r->target.height);
            } else if (const auto* cat = std::get_if<ConcatSpec>(&n.spec)) {
                for (const auto& x : ins)
                    f.pool = cat->align == Align::Down ? std::max(f.pool, x.pool)
                                                       : std::min(f.pool, x.pool);
            }
            flow[n.id] = f;
            ++resolved;
        }
        if (resolved == before) throw std::logic_error("oracle_labels: unresolved inputs");
    }
    return labels;
}

GroupingOracle group_by_label(const std::vector<NetworkTopology>& nets) {
    GroupingOracle o;
    for (const auto& net : nets)
        for (const auto& [id, label] : oracle_labels(net)) {
            ++o.source_nodes;
            o.groups[label].insert(net.name + "/" + id);
        }
    for (const auto& [label, _] : o.groups) {
        const int depth = std::stoi(label.substr(label.find(',') + 1));
        ++o.per_depth[depth];
    }
    return o;
}

Tensor naive_conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                    Padding padding) {
    const long C = static_cast<long>(input.dim(0)), H = static_cast<long>(input.dim(1)),
               W = static_cast<long>(input.dim(2));
    const long Co = static_cast<long>(weights.dim(0)), k = static_cast<long>(weights.dim(2));
    const long pad = padding == Padding::Same ? k / 2 : 0;
    const long Ho = H + 2 * pad - k + 1, Wo = W + 2 * pad - k + 1;
    Tensor out({static_cast<std::size_t>(Co), static_cast<std::size_t>(Ho),
                static_cast<std::size_t>(Wo)});
    for (long o = 0; o < Co; ++o)
        for (long y = 0; y < Ho; ++y)
            for (long x = 0; x < Wo; ++x) {
                double acc = bias[static_cast<std::size_t>(o)];
                for (long c = 0; c < C; ++c)
                    for (long i = 0; i < k; ++i)
                        for (long j = 0; j < k; ++j) {
                            const long iy = y + i - pad, ix = x + j - pad;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += weights[static_cast<std::size_t>(((o * C + c) * k + i) * k + j)] *
                                   input[static_cast<std::size_t>((c * H + iy) * W + ix)];
                        }
                out[static_cast<std::size_t>((o * Ho + y) * Wo + x)] = acc;
            }
    return out;
}

double oracle_ssim(const Tensor& a, const Tensor& b) {
    const long H = static_cast<long>(a.dim(a.rank() - 2)), W = static_cast<long>(a.dim(a.rank() - 1));
    const double c1 = std::pow(0.01 * 1.0, 2), c2 = std::pow(0.03 * 1.0, 2);
    double sum = 0;
    for (long y = 0; y < H; ++y)
        for (long x = 0; x < W; ++x) {
            // Explicit kernel for this pixel, normalised over the in-image part.
            std::vector<double> w;
            std::vector<double> xa, xb;
            for (long dy = -5; dy <= 5; ++dy)
                for (long dx = -5; dx <= 5; ++dx) {
                    const long yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                    w.push_back(std::exp(-static_cast<double>(dy * dy + dx * dx) / (2 * 1.5 * 1.5)));
                    xa.push_back(a[static_cast<std::size_t>(yy * W + xx)]);
                    xb.push_back(b[static_cast<std::size_t>(yy * W + xx)]);
                }
            double total = 0;
            for (double v : w) total += v;
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double p = w[i] / total;
                ma += p * xa[i];
                mb += p * xb[i];
                saa += p * xa[i] * xa[i];
                sbb += p * xb[i] * xb[i];
                sab += p * xa[i] * xb[i];
            }
            const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
            sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    return sum / static_cast<double>(H * W);
}

double oracle_uqi(const Tensor& a, const Tensor& b) {
    const long H = static_cast<long>(a.dim(a.rank() - 2)), W = static_cast<long>(a.dim(a.rank() - 1));
    const long wh = std::min(8L, H), ww = std::min(8L, W);
    double sum = 0;
    long count = 0;
    for (long y0 = 0; y0 + wh <= H; ++y0)
        for (long x0 = 0; x0 + ww <= W; ++x0) {
            const double n = static_cast<double>(wh * ww);
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (long y = y0; y < y0 + wh; ++y)
                for (long x = x0; x < x0 + ww; ++x) {
                    const double p = a[static_cast<std::size_t>(y * W + x)];
                    const double q = b[static_cast<std::size_t>(y * W + x)];
                    sa += p;
                    sb += q;
                    saa += p * p;
                    sbb += q * q;
                    sab += p * q;
                }
            const double ma = sa / n, mb = sb / n;
            // Unbiased estimates; the n-1 cancels in the ratio.
            const double va = (saa - n * ma * ma) / (n - 1), vb = (sbb - n * mb * mb) / (n - 1);
            const double cov = (sab - n * ma * mb) / (n - 1);
            sum += 4 * cov * ma * mb / ((va + vb) * (ma * ma + mb * mb));
            ++count;
        }
    return sum / static_cast<double>(count);
}

double oracle_pcc(const Tensor& a, const Tensor& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
        sab += a[i] * b[i];
    }
    return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

std::vector<double> numeric_gradient(Tensor& x, const std::function<double()>& f, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = f();
        x[i] = orig - h;
        const double down = f();
        x[i] = orig;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) /
           std::max({std::abs(analytic), std::abs(numeric), floor});
}

Tensor random_tensor(const std::vector<std::size_t>& shape, std::mt19937_64& gen, double lo,
                     double hi) {
    Tensor t(shape);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data()) v = dist(gen);
    return t;
}

NetworkTopology random_sequential(std::mt19937_64& gen, const std::string& name) {
    constexpr std::int64_t size = 48;
    NetworkTopology net{name, {1, size, size}, {}};
    int counter = 0;
    auto add = [&](const std::string& prefix, LayerSpec spec) {
        const std::string prev = net.nodes.empty() ? std::string(kInputId) : net.nodes.back().id;
        net.nodes.push_back({prefix + std::to_string(++counter), std::move(spec), {prev}});
    };
    auto conv = [&] {
        const int k = coin(gen, 0.5) ? 3 : 5;
        add("conv", ConvSpec{k, k == 3 ? 8 : 4, Padding::Same, Activation::ReLU, true});
    };

    int pool = 1;
    conv();
    const int middle = pick(gen, 1, 5);
    for (int i = 0; i < middle; ++i) {
        if (pool < 8 && coin(gen, 0.35)) {
            add("pool", MaxPoolSpec{2});
            pool *= 2;
        }
        conv();
    }
    if (coin(gen, 0.3)) {
        const bool wide = coin(gen, 0.5);
        add("dense", DenseSpec{wide ? 20 : 10, Activation::ReLU, wide ? 0.5 : 0.0});
        const int q = coin(gen, 0.5) ? 4 : 8;
        add("dense", DenseSpec{static_cast<int>((size / q) * (size / q)), Activation::ReLU, 0.0});
        add("reshape", ReshapeSpec{{1, size / q, size / q}});
        add("unpool", UnpoolSpec{q});
    } else if (pool > 1) {
        add("unpool", UnpoolSpec{pool});
    }
    add("conv_out", ConvSpec{1, 1, Padding::Same, Activation::Sigmoid, false});
    net.nodes.back().id = "conv_out";
    add("output", OutputSpec{});
    net.nodes.back().id = "output";
    return net;
}

NetworkTopology random_topology(std::mt19937_64& gen, const std::string& name) {
    NetworkTopology net{name, {pick(gen, 1, 4), pick(gen, 1, 300), pick(gen, 1, 300)}, {}};
    const int count = pick(gen, 1, 12);
    std::vector<std::string> available{std::string(kInputId)};
    std::set<std::string> consumed;
    auto any_of = [&] { return available[static_cast<std::size_t>(pick(gen, 0, static_cast<int>(available.size()) - 1))]; };
    const Activation acts[] = {Activation::None, Activation::ReLU, Activation::Sigmoid};
    for (int i = 0; i < count; ++i) {
        Node n;
        n.id = "n" + std::to_string(i) + (coin(gen, 0.2) ? "_x.y-z" : "");
        switch (pick(gen, 0, 5)) {
        case 0: {
            const bool same = coin(gen, 0.7);
            const int k = same ? 2 * pick(gen, 0, 3) + 1 : pick(gen, 1, 7);
            n.spec = ConvSpec{k, pick(gen, 1, 64), same ? Padding::Same : Padding::Valid,
                              acts[pick(gen, 0, 2)], coin(gen, 0.5)};
            break;
        }
        case 1:
            n.spec = DenseSpec{pick(gen, 1, 1000), acts[pick(gen, 0, 2)], pick(gen, 0, 9) / 10.0};
            break;
        case 2: n.spec = MaxPoolSpec{pick(gen, 2, 8)}; break;
        case 3: n.spec = UnpoolSpec{pick(gen, 2, 8)}; break;
        case 4: n.spec = ConcatSpec{coin(gen, 0.5) ? Align::Up : Align::Down}; break;
        default: n.spec = ReshapeSpec{{pick(gen, 1, 9), pick(gen, 1, 99), pick(gen, 1, 99)}}; break;
        }
        if (std::holds_alternative<ConcatSpec>(n.spec)) {
            const int fan = pick(gen, 1, 3);
            for (int j = 0; j < fan; ++j) {
                auto in = any_of();
                if (std::find(n.inputs.begin(), n.inputs.end(), in) == n.inputs.end())
                    n.inputs.push_back(in);
            }
        } else {
            n.inputs.push_back(any_of());
        }
        for (const auto& in : n.inputs) consumed.insert(in);
        available.push_back(n.id);
        net.nodes.push_back(std::move(n));
    }
    // Everything not yet consumed is gathered into the output.
    std::vector<std::string> sinks;
    for (const auto& n : net.nodes)
        if (!consumed.count(n.id)) sinks.push_back(n.id);
    std::string last = sinks.front();
    if (sinks.size() > 1) {
        net.nodes.push_back({"gather", ConcatSpec{Align::Up}, sinks});
        last = "gather";
    }
    net.nodes.push_back({"output", OutputSpec{}, {last}});
    return net;
}

} // namespace spdnn::oracle

#include "spdnn/graph.hpp"

namespace spdnn::oracle {

std::vector<std::string> label_path(const LabeledGraph& g) {
    std::vector<std::string> labels;
    std::string at = g.input_id;
    while (true) {
        labels.push_back(full_label(g.node(at)));
        const auto out = g.out_edges(at);
        if (out.empty()) break;
        if (out.size() != 1) throw std::logic_error("label_path: graph is not sequential");
        at = out.front()->to;
    }
    return labels;
}

bool has_label_path(const LabeledGraph& g, const std::vector<std::string>& labels) {
    if (labels.empty() || full_label(g.node(g.input_id)) != labels.front()) return false;
    std::set<std::string> frontier{g.input_id};
    for (std::size_t i = 1; i < labels.size() && !frontier.empty(); ++i) {
        std::set<std::string> next;
        for (const auto& id : frontier)
            for (const auto* e : g.out_edges(id))
                if (full_label(g.node(e->to)) == labels[i]) next.insert(e->to);
        frontier = std::move(next);
    }
    return !frontier.empty();
}

std::size_t weighted_layers(const NetworkTopology& net) {
    return static_cast<std::size_t>(std::count_if(net.nodes.begin(), net.nodes.end(), [](const Node& n) {
        return std::holds_alternative<ConvSpec>(n.spec) || std::holds_alternative<DenseSpec>(n.spec);
    }));
}

} // namespace spdnn::oracle
