#include "spdnn/graph.hpp"

#include "spdnn/error.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace spdnn {

std::string to_string(const Structure& s) {
    switch (s.kind) {
    case GraphNodeKind::Input: return "IN";
    case GraphNodeKind::Output: return "OUT";
    case GraphNodeKind::Conv: return std::to_string(s.size) + "C";
    case GraphNodeKind::Dense: return std::to_string(s.size) + "F";
    }
    return "?";
}

std::string full_label(const GraphNode& n) {
    if (n.structure.kind == GraphNodeKind::Input || n.structure.kind == GraphNodeKind::Output)
        return to_string(n.structure);
    std::string label = to_string(n.structure);
    if (n.pool_factor > 1) label += std::to_string(n.pool_factor) + "P";
    return label + "," + std::to_string(n.depth);
}

const GraphNode& LabeledGraph::node(std::string_view id) const {
    for (const auto& n : nodes)
        if (n.id == id) return n;
    throw ValidationError("no such graph node", std::string(id));
}

std::vector<const GraphEdge*> LabeledGraph::in_edges(std::string_view id) const {
    std::vector<const GraphEdge*> out;
    for (const auto& e : edges)
        if (e.to == id) out.push_back(&e);
    return out;
}

std::vector<const GraphEdge*> LabeledGraph::out_edges(std::string_view id) const {
    std::vector<const GraphEdge*> out;
    for (const auto& e : edges)
        if (e.from == id) out.push_back(&e);
    return out;
}

std::size_t LabeledGraph::internal_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const GraphNode& n) {
        return n.structure.kind == GraphNodeKind::Conv || n.structure.kind == GraphNodeKind::Dense;
    }));
}

void validate(const LabeledGraph& g) {
    std::unordered_map<std::string_view, std::size_t> pos;
    std::size_t inputs = 0, outputs = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto& n = g.nodes[i];
        if (!pos.emplace(n.id, i).second) throw ValidationError("duplicate graph node", n.id);
        if (n.structure.kind == GraphNodeKind::Input) ++inputs;
        if (n.structure.kind == GraphNodeKind::Output) ++outputs;
        if (n.structure.kind != GraphNodeKind::Input && n.depth < 1)
            throw ValidationError("non-input node with depth < 1", n.id);
        if (n.pool_factor < 1) throw ValidationError("pool factor must be positive", n.id);
    }
    if (inputs != 1 || outputs != 1)
        throw ValidationError("graph needs exactly one input and one output node");
    if (!pos.count(g.input_id) || !pos.count(g.output_id))
        throw ValidationError("graph terminals are missing");

    std::vector<std::vector<std::size_t>> succ(g.nodes.size()), pred(g.nodes.size());
    for (const auto& e : g.edges) {
        auto f = pos.find(e.from), t = pos.find(e.to);
        if (f == pos.end() || t == pos.end())
            throw ValidationError("edge references unknown node", f == pos.end() ? e.from : e.to);
        // Stored order is topological, so a backwards edge would close a cycle.
        if (f->second >= t->second) throw ValidationError("edge breaks topological order", e.to);
        succ[f->second].push_back(t->second);
        pred[t->second].push_back(f->second);
    }

    auto sweep = [&](std::size_t start, const auto& adj) {
        std::vector<bool> seen(g.nodes.size(), false);
        std::vector<std::size_t> stack{start};
        seen[start] = true;
        while (!stack.empty()) {
            auto i = stack.back();
            stack.pop_back();
            for (auto j : adj[i]) {
                if (seen[j]) continue;
                seen[j] = true;
                stack.push_back(j);
            }
        }
        return seen;
    };
    auto fwd = sweep(pos.at(g.input_id), succ);
    auto bwd = sweep(pos.at(g.output_id), pred);
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (!fwd[i] || !bwd[i])
            throw ValidationError("node is not on an input-to-output path", g.nodes[i].id);
}

namespace {

// Data flowing along one incoming edge of the next graph node.
struct Source {
    std::string node;
    std::int64_t pool = 1;
    std::optional<Shape3> reshape;
};

class GraphBuilder {
public:
    explicit GraphBuilder(const NetworkTopology& net) : net_(net) {
        g_.name = net.name;
        g_.input = net.input;
        GraphNode in;
        in.id = std::string(kGraphInputId);
        in.structure = {GraphNodeKind::Input, 0};
        add_node(std::move(in));
        flows_[std::string(kInputId)] = {Source{g_.input_id, 1, std::nullopt}};
    }

    LabeledGraph build() {
        for (const auto& n : canonical_order(net_).nodes) visit(n);
        validate(g_);
        return std::move(g_);
    }

private:
    void add_node(GraphNode n) {
        depth_[n.id] = n.depth;
        g_.nodes.push_back(std::move(n));
    }

    std::vector<Source> gather(const Node& n) const {
        std::vector<Source> all;
        for (const auto& in : n.inputs) {
            const auto& f = flows_.at(in);
            all.insert(all.end(), f.begin(), f.end());
        }
        return all;
    }

    std::int64_t common_pool(const std::vector<Source>& sources, const std::string& id) const {
        auto p = sources.front().pool;
        for (const auto& s : sources)
            if (s.pool != p)
                throw ValidationError("inputs arrive with different pool factors (" +
                                          std::to_string(p) + " vs " + std::to_string(s.pool) +
                                          ")",
                                      id);
        return p;
    }

    void connect(const std::vector<Source>& sources, GraphNode node) {
        int depth = 0;
        for (const auto& s : sources) depth = std::max(depth, depth_.at(s.node));
        node.depth = depth + 1;
        for (const auto& s : sources) {
            auto dup = std::find_if(g_.edges.begin(), g_.edges.end(), [&](const GraphEdge& e) {
                return e.from == s.node && e.to == node.id;
            });
            if (dup == g_.edges.end()) {
                g_.edges.push_back({s.node, node.id, s.reshape});
            } else if (dup->reshape != s.reshape) {
                throw ValidationError("conflicting reshapes on repeated edge from '" + s.node + "'",
                                      node.id);
            }
        }
        add_node(std::move(node));
    }

    void visit(const Node& n) {
        auto sources = gather(n);
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, MaxPoolSpec>) {
                    for (auto& src : sources) src.pool *= s.factor;
                    flows_[n.id] = std::move(sources);
                } else if constexpr (std::is_same_v<T, UnpoolSpec>) {
                    for (auto& src : sources) {
                        if (src.pool % s.factor != 0)
                            throw ValidationError("unpool factor " + std::to_string(s.factor) +
                                                      " does not divide accumulated pool factor " +
                                                      std::to_string(src.pool),
                                                  n.id);
                        src.pool /= s.factor;
                    }
                    flows_[n.id] = std::move(sources);
                } else if constexpr (std::is_same_v<T, ReshapeSpec>) {
                    if (sources.size() != 1)
                        throw ValidationError("reshape of a multi-branch concat has no graph form",
                                              n.id);
                    const auto& t = s.target;
                    if (net_.input.height % t.height != 0 || net_.input.width % t.width != 0 ||
                        net_.input.height / t.height != net_.input.width / t.width)
                        throw ValidationError("reshape target " + to_string(t) +
                                                  " is not an integer pooling of the input",
                                              n.id);
                    sources.front().pool = net_.input.height / t.height;
                    sources.front().reshape = t;
                    flows_[n.id] = std::move(sources);
                } else if constexpr (std::is_same_v<T, ConcatSpec>) {
                    std::int64_t target = sources.front().pool;
                    for (const auto& src : sources)
                        target = s.align == Align::Down ? std::max(target, src.pool)
                                                        : std::min(target, src.pool);
                    for (auto& src : sources) {
                        auto hi = std::max(src.pool, target), lo = std::min(src.pool, target);
                        if (hi % lo != 0)
                            throw ValidationError("concat branch pool factors " +
                                                      std::to_string(src.pool) + " and " +
                                                      std::to_string(target) +
                                                      " have no integer ratio",
                                                  n.id);
                        src.pool = target;
                    }
                    flows_[n.id] = std::move(sources);
                } else if constexpr (std::is_same_v<T, ConvSpec>) {
                    GraphNode node;
                    node.id = n.id;
                    node.structure = {GraphNodeKind::Conv, s.kernel};
                    node.pool_factor = static_cast<int>(common_pool(sources, n.id));
                    node.payload = {s.channels, s.padding, s.activation, s.batch_norm, 0.0};
                    node.origin.emplace(net_.name, n.id);
                    flows_[n.id] = {Source{n.id, node.pool_factor, std::nullopt}};
                    connect(sources, std::move(node));
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    GraphNode node;
                    node.id = n.id;
                    node.structure = {GraphNodeKind::Dense, s.units};
                    node.pool_factor = 1;
                    node.payload = {s.units, Padding::Same, s.activation, false, s.dropout};
                    node.origin.emplace(net_.name, n.id);
                    flows_[n.id] = {Source{n.id, 1, std::nullopt}};
                    connect(sources, std::move(node));
                } else {
                    GraphNode node;
                    node.id = std::string(kGraphOutputId);
                    node.structure = {GraphNodeKind::Output, 0};
                    node.pool_factor = static_cast<int>(common_pool(sources, n.id));
                    node.origin.emplace(net_.name, n.id);
                    connect(sources, std::move(node));
                }
            },
            n.spec);
    }

    const NetworkTopology& net_;
    LabeledGraph g_;
    std::unordered_map<std::string, std::vector<Source>> flows_;
    std::unordered_map<std::string, int> depth_;
};

std::string quoted(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

} // namespace

LabeledGraph to_graph(const NetworkTopology& net) {
    validate(net);
    return GraphBuilder(net).build();
}

std::string to_dot(const LabeledGraph& g) {
    std::string out = "digraph " + quoted(g.name) + " {\n";
    out += "  rankdir=TB;\n  node [shape=box];\n";
    for (const auto& n : g.nodes)
        out += "  " + quoted(n.id) + " [label=" + quoted(full_label(n)) + "];\n";
    for (const auto& e : g.edges) out += "  " + quoted(e.from) + " -> " + quoted(e.to) + ";\n";
    out += "}\n";
    return out;
}

} // namespace spdnn
