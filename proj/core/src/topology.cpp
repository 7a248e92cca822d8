#include "spdnn/topology.hpp"

#include "spdnn/error.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>

namespace spdnn {

std::string to_string(const Shape3& s) {
    return std::to_string(s.channels) + "×" + std::to_string(s.height) + "×" +
           std::to_string(s.width);
}

std::string_view to_string(Padding p) noexcept {
    return p == Padding::Same ? "same" : "valid";
}

std::string_view to_string(Activation a) noexcept {
    switch (a) {
    case Activation::None: return "none";
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    }
    return "none";
}

std::string_view to_string(Align a) noexcept {
    return a == Align::Up ? "up" : "down";
}

LayerKind kind_of(const LayerSpec& spec) noexcept {
    return static_cast<LayerKind>(spec.index());
}

std::string_view op_name(LayerKind kind) noexcept {
    switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Unpool: return "unpool";
    case LayerKind::Concat: return "concat";
    case LayerKind::Reshape: return "reshape";
    case LayerKind::Output: return "output";
    }
    return "?";
}

const Node* NetworkTopology::find(std::string_view id) const noexcept {
    auto it = std::find_if(nodes.begin(), nodes.end(), [&](const Node& n) { return n.id == id; });
    return it == nodes.end() ? nullptr : &*it;
}

const Node& NetworkTopology::output_node() const {
    for (const auto& n : nodes)
        if (n.kind() == LayerKind::Output) return n;
    throw ValidationError("network '" + name + "' has no output node");
}

bool NetworkTopology::is_sequential() const noexcept {
    return std::all_of(nodes.begin(), nodes.end(),
                       [](const Node& n) { return n.inputs.size() == 1; });
}

bool is_identifier(std::string_view s) noexcept {
    if (s.empty()) return false;
    auto head = static_cast<unsigned char>(s.front());
    if (!std::isalpha(head) && head != '_') return false;
    return std::all_of(s.begin() + 1, s.end(), [](char c) {
        auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) || c == '_' || c == '.' || c == '-';
    });
}

namespace {

void check_fields(const Node& node) {
    const auto& id = node.id;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ConvSpec>) {
                if (s.kernel < 1) throw ValidationError("conv kernel must be positive", id);
                if (s.channels < 1) throw ValidationError("conv channels must be positive", id);
                if (s.padding == Padding::Same && s.kernel % 2 == 0)
                    throw ValidationError("same padding requires an odd kernel", id);
            } else if constexpr (std::is_same_v<T, DenseSpec>) {
                if (s.units < 1) throw ValidationError("dense units must be positive", id);
                if (!(s.dropout >= 0.0 && s.dropout < 1.0))
                    throw ValidationError("dropout must lie in [0,1)", id);
            } else if constexpr (std::is_same_v<T, MaxPoolSpec> || std::is_same_v<T, UnpoolSpec>) {
                if (s.factor < 2) throw ValidationError("pool factor must be at least 2", id);
            } else if constexpr (std::is_same_v<T, ReshapeSpec>) {
                if (s.target.channels < 1 || s.target.height < 1 || s.target.width < 1)
                    throw ValidationError("reshape target must be positive", id);
            }
        },
        node.spec);

    if (node.kind() == LayerKind::Concat) {
        if (node.inputs.empty()) throw ValidationError("concat needs at least one input", id);
    } else if (node.inputs.size() != 1) {
        throw ValidationError("layer must have exactly one input, has " +
                                  std::to_string(node.inputs.size()),
                              id);
    }
}

} // namespace

void validate(const NetworkTopology& net) {
    if (!is_identifier(net.name))
        throw ValidationError("network name '" + net.name + "' is not an identifier");
    if (net.input.channels < 1 || net.input.height < 1 || net.input.width < 1)
        throw ValidationError("input dimensions must be positive");
    if (net.nodes.empty()) throw ValidationError("network has no nodes");

    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        const auto& n = net.nodes[i];
        if (!is_identifier(n.id)) throw ValidationError("invalid node id", n.id);
        if (n.id == kInputId) throw ValidationError("id 'input' is reserved", n.id);
        if (!index.emplace(n.id, i).second) throw ValidationError("duplicate node id", n.id);
    }

    std::size_t outputs = 0;
    for (const auto& n : net.nodes) {
        check_fields(n);
        if (n.kind() == LayerKind::Output) ++outputs;
        for (const auto& in : n.inputs)
            if (in != kInputId && !index.count(in))
                throw ValidationError("unknown input '" + in + "'", n.id);
    }
    if (outputs != 1)
        throw ValidationError("network must have exactly one output node, has " +
                              std::to_string(outputs));

    // Kahn's algorithm; anything left over sits on a cycle.
    std::vector<std::vector<std::size_t>> consumers(net.nodes.size());
    std::vector<std::size_t> pending(net.nodes.size(), 0);
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        for (const auto& in : net.nodes[i].inputs) {
            if (in == kInputId) continue;
            consumers[index.at(in)].push_back(i);
            ++pending[i];
        }
        if (pending[i] == 0) ready.push_back(i);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        auto i = ready.back();
        ready.pop_back();
        ++visited;
        for (auto c : consumers[i])
            if (--pending[c] == 0) ready.push_back(c);
    }
    if (visited != net.nodes.size()) {
        for (std::size_t i = 0; i < net.nodes.size(); ++i)
            if (pending[i] != 0) throw ValidationError("node lies on a cycle", net.nodes[i].id);
    }

    // With every layer having an input and no cycles, each node is fed from
    // the network input; what remains is that each one reaches the output.
    auto order = canonical_order(net);
    std::vector<bool> to_output(net.nodes.size(), false);
    for (auto it = order.nodes.rbegin(); it != order.nodes.rend(); ++it) {
        auto i = index.at(it->id);
        if (it->kind() == LayerKind::Output) {
            if (!consumers[i].empty())
                throw ValidationError("output node must not feed other layers", it->id);
            to_output[i] = true;
        }
        if (!to_output[i]) throw ValidationError("node does not lead to the output", it->id);
        for (const auto& in : it->inputs)
            if (in != kInputId) to_output[index.at(in)] = true;
    }
}

NetworkTopology canonical_order(const NetworkTopology& net) {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < net.nodes.size(); ++i) index.emplace(net.nodes[i].id, i);

    std::vector<std::size_t> pending(net.nodes.size(), 0);
    std::vector<std::vector<std::size_t>> consumers(net.nodes.size());
    for (std::size_t i = 0; i < net.nodes.size(); ++i)
        for (const auto& in : net.nodes[i].inputs) {
            auto it = index.find(in);
            if (it == index.end()) continue;
            consumers[it->second].push_back(i);
            ++pending[i];
        }

    // Smallest original index first keeps already-sorted networks unchanged.
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < net.nodes.size(); ++i)
        if (pending[i] == 0) ready.insert(i);

    NetworkTopology out{net.name, net.input, {}};
    out.nodes.reserve(net.nodes.size());
    while (!ready.empty()) {
        auto i = *ready.begin();
        ready.erase(ready.begin());
        out.nodes.push_back(net.nodes[i]);
        for (auto c : consumers[i])
            if (--pending[c] == 0) ready.insert(c);
    }
    if (out.nodes.size() != net.nodes.size())
        throw ValidationError("network '" + net.name + "' contains a cycle");
    return out;
}

bool same_structure(const NetworkTopology& a, const NetworkTopology& b) {
    if (a.input != b.input || a.nodes.size() != b.nodes.size()) return false;
    auto ca = canonical_order(a);
    auto cb = canonical_order(b);
    auto positions = [](const NetworkTopology& n) {
        std::unordered_map<std::string, long> pos;
        for (std::size_t i = 0; i < n.nodes.size(); ++i) pos.emplace(n.nodes[i].id, long(i));
        pos.emplace(std::string(kInputId), -1);
        return pos;
    };
    auto pa = positions(ca);
    auto pb = positions(cb);
    for (std::size_t i = 0; i < ca.nodes.size(); ++i) {
        const auto& x = ca.nodes[i];
        const auto& y = cb.nodes[i];
        if (x.spec != y.spec || x.inputs.size() != y.inputs.size()) return false;
        for (std::size_t j = 0; j < x.inputs.size(); ++j)
            if (pa.at(x.inputs[j]) != pb.at(y.inputs[j])) return false;
    }
    return true;
}

NetworkTopology with_input_size(NetworkTopology net, std::int64_t height, std::int64_t width) {
    net.input.height = height;
    net.input.width = width;
    return net;
}

void ShapeTable::add(std::string id, Shape3 shape) {
    entries_.emplace_back(std::move(id), shape);
}

const Shape3& ShapeTable::at(std::string_view id) const {
    for (const auto& [k, v] : entries_)
        if (k == id) return v;
    throw ShapeError("no shape recorded", std::string(id));
}

Shape3 layer_output_shape(const Node& node, const std::vector<Shape3>& inputs) {
    const auto& id = node.id;
    if (inputs.empty()) throw ShapeError("layer has no inputs", id);
    const Shape3& in = inputs.front();
    return std::visit(
        [&](const auto& s) -> Shape3 {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ConvSpec>) {
                if (s.padding == Padding::Same) return {s.channels, in.height, in.width};
                if (in.height < s.kernel || in.width < s.kernel)
                    throw ShapeError("valid convolution kernel " + std::to_string(s.kernel) +
                                         " larger than input " + to_string(in),
                                     id);
                return {s.channels, in.height - s.kernel + 1, in.width - s.kernel + 1};
            } else if constexpr (std::is_same_v<T, DenseSpec>) {
                return {s.units, 1, 1};
            } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                if (in.height % s.factor != 0)
                    throw ShapeError("height " + std::to_string(in.height) +
                                         " not divisible by pool factor " + std::to_string(s.factor),
                                     id);
                if (in.width % s.factor != 0)
                    throw ShapeError("width " + std::to_string(in.width) +
                                         " not divisible by pool factor " + std::to_string(s.factor),
                                     id);
                return {in.channels, in.height / s.factor, in.width / s.factor};
            } else if constexpr (std::is_same_v<T, UnpoolSpec>) {
                return {in.channels, in.height * s.factor, in.width * s.factor};
            } else if constexpr (std::is_same_v<T, ConcatSpec>) {
                auto h = inputs.front().height;
                auto w = inputs.front().width;
                for (const auto& x : inputs) {
                    h = s.align == Align::Up ? std::max(h, x.height) : std::min(h, x.height);
                    w = s.align == Align::Up ? std::max(w, x.width) : std::min(w, x.width);
                }
                std::int64_t channels = 0;
                for (const auto& x : inputs) {
                    bool ok = s.align == Align::Up
                                  ? (h % x.height == 0 && w % x.width == 0 &&
                                     h / x.height == w / x.width)
                                  : (x.height % h == 0 && x.width % w == 0 &&
                                     x.height / h == x.width / w);
                    if (!ok)
                        throw ShapeError("concat input " + to_string(x) +
                                             " cannot be aligned to " + std::to_string(h) +
                                             "×" + std::to_string(w),
                                         id);
                    channels += x.channels;
                }
                return {channels, h, w};
            } else if constexpr (std::is_same_v<T, ReshapeSpec>) {
                if (s.target.elements() != in.elements())
                    throw ShapeError("reshape from " + to_string(in) + " to " +
                                         to_string(s.target) + " changes the element count",
                                     id);
                return s.target;
            } else {
                return in;
            }
        },
        node.spec);
}

ShapeTable infer_shapes(const NetworkTopology& net) {
    auto ordered = canonical_order(net);
    std::unordered_map<std::string, Shape3> known{{std::string(kInputId), net.input}};
    ShapeTable table;
    for (const auto& n : ordered.nodes) {
        std::vector<Shape3> ins;
        ins.reserve(n.inputs.size());
        for (const auto& in : n.inputs) {
            auto it = known.find(in);
            if (it == known.end()) throw ShapeError("unknown input '" + in + "'", n.id);
            ins.push_back(it->second);
        }
        auto out = layer_output_shape(n, ins);
        known.emplace(n.id, out);
        table.add(n.id, out);
    }
    return table;
}

} // namespace spdnn
