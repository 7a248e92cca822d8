#include "spdnn/merge.hpp"

#include "spdnn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace spdnn {

std::string_view to_string(ConcatPolicy p) noexcept {
    switch (p) {
    case ConcatPolicy::Auto: return "auto";
    case ConcatPolicy::Up: return "up";
    case ConcatPolicy::Down: return "down";
    }
    return "auto";
}

std::optional<ConcatPolicy> parse_policy(std::string_view s) noexcept {
    if (s == "auto") return ConcatPolicy::Auto;
    if (s == "up") return ConcatPolicy::Up;
    if (s == "down") return ConcatPolicy::Down;
    return std::nullopt;
}

std::string to_json(const ContractionReport& report) {
    nlohmann::ordered_json j;
    j["source_nodes"] = report.source_nodes;
    j["merged_nodes"] = report.merged_nodes;
    auto groups = nlohmann::ordered_json::object();
    for (const auto& g : report.groups) {
        auto origins = nlohmann::ordered_json::array();
        for (const auto& [net, node] : g.origins) origins.push_back(net + "/" + node);
        groups[g.label] = origins;
    }
    j["groups"] = groups;
    auto sites = nlohmann::ordered_json::array();
    for (const auto& s : report.concat_sites) {
        nlohmann::ordered_json site;
        site["node"] = s.node_id;
        site["consumer"] = s.consumer;
        site["align"] = std::string(to_string(s.align));
        site["pool_factors"] = s.pool_factors;
        site["predecessors"] = s.predecessors;
        sites.push_back(site);
    }
    j["concat_sites"] = sites;
    return j.dump(2) + "\n";
}

LabeledGraph parallelize(const std::vector<LabeledGraph>& graphs) {
    if (graphs.size() < 2)
        throw ValidationError("parallelize needs at least two graphs, got " +
                              std::to_string(graphs.size()));
    for (const auto& g : graphs) {
        validate(g);
        if (g.input != graphs.front().input)
            throw ValidationError("graph '" + g.name + "' input " + to_string(g.input) +
                                  " differs from '" + graphs.front().name + "' input " +
                                  to_string(graphs.front().input));
    }

    LabeledGraph p;
    p.name = "parallel";
    p.input = graphs.front().input;
    GraphNode in;
    in.id = p.input_id;
    in.structure = {GraphNodeKind::Input, 0};
    GraphNode out;
    out.id = p.output_id;
    out.structure = {GraphNodeKind::Output, 0};
    out.pool_factor = graphs.front().node(graphs.front().output_id).pool_factor;

    p.nodes.push_back(in);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& g = graphs[i];
        const std::string prefix = "g" + std::to_string(i) + "/";
        auto rename = [&](const std::string& id) {
            if (id == g.input_id) return p.input_id;
            if (id == g.output_id) return p.output_id;
            return prefix + id;
        };
        for (const auto& n : g.nodes) {
            if (n.id == g.input_id) continue;
            if (n.id == g.output_id) {
                out.depth = std::max(out.depth, n.depth);
                out.pool_factor = std::min(out.pool_factor, n.pool_factor);
                out.origin.insert(n.origin.begin(), n.origin.end());
                continue;
            }
            GraphNode copy = n;
            copy.id = rename(n.id);
            p.nodes.push_back(std::move(copy));
        }
        for (const auto& e : g.edges) p.edges.push_back({rename(e.from), rename(e.to), e.reshape});
    }
    p.nodes.push_back(std::move(out));
    return p;
}

namespace {

std::string merged_id(const GraphNode& n) {
    std::string id = "d" + std::to_string(n.depth) + "_" + to_string(n.structure);
    if (n.pool_factor > 1) id += std::to_string(n.pool_factor) + "P";
    return id;
}

bool is_terminal(const GraphNode& n) {
    return n.structure.kind == GraphNodeKind::Input || n.structure.kind == GraphNodeKind::Output;
}

} // namespace

Contraction contract(const LabeledGraph& g) {
    validate(g);

    // Group members by full label; the terminals keep their ids.
    std::map<std::string, std::size_t> group_of_label;
    std::vector<GraphNode> merged;
    std::unordered_map<std::string, std::string> target; // member id -> merged id
    for (const auto& n : g.nodes) {
        const std::string label = full_label(n);
        auto [it, fresh] = group_of_label.emplace(label, merged.size());
        if (fresh) {
            GraphNode m = n;
            m.id = is_terminal(n) ? n.id : merged_id(n);
            merged.push_back(std::move(m));
        } else {
            auto& m = merged[it->second];
            if (m.payload != n.payload)
                throw ValidationError("nodes labelled '" + label +
                                          "' disagree on channels, padding, activation, batch-norm or dropout",
                                      n.id);
            m.origin.insert(n.origin.begin(), n.origin.end());
            m.depth = std::max(m.depth, n.depth); // equal except for the terminals
        }
        target[n.id] = merged[it->second].id;
    }

    std::stable_sort(merged.begin(), merged.end(), [](const GraphNode& a, const GraphNode& b) {
        auto rank = [](const GraphNode& n) {
            return n.structure.kind == GraphNodeKind::Input    ? 0
                   : n.structure.kind == GraphNodeKind::Output ? 2
                                                               : 1;
        };
        if (rank(a) != rank(b)) return rank(a) < rank(b);
        if (a.depth != b.depth) return a.depth < b.depth;
        return full_label(a) < full_label(b);
    });
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < merged.size(); ++i) pos.emplace(merged[i].id, i);

    std::map<std::pair<std::size_t, std::size_t>, GraphEdge> edges;
    for (const auto& e : g.edges) {
        GraphEdge m{target.at(e.from), target.at(e.to), e.reshape};
        auto key = std::make_pair(pos.at(m.from), pos.at(m.to));
        auto [it, fresh] = edges.emplace(key, m);
        if (!fresh && it->second.reshape != m.reshape)
            throw ValidationError("merged edge from '" + m.from + "' carries conflicting reshapes",
                                  m.to);
    }

    Contraction result;
    result.graph.name = g.name;
    result.graph.input = g.input;
    result.graph.input_id = g.input_id;
    result.graph.output_id = g.output_id;
    result.graph.nodes = std::move(merged);
    for (auto& [_, e] : edges) result.graph.edges.push_back(std::move(e));
    validate(result.graph);

    result.report.source_nodes = g.internal_count();
    result.report.merged_nodes = result.graph.internal_count();
    for (const auto& n : result.graph.nodes) {
        if (is_terminal(n)) continue;
        result.report.groups.push_back({full_label(n), {n.origin.begin(), n.origin.end()}});
    }
    return result;
}

namespace {

std::string sanitize(std::string_view id) {
    std::string out;
    for (char c : id) {
        auto u = static_cast<unsigned char>(c);
        out += (std::isalnum(u) || c == '_' || c == '.' || c == '-') ? c : '_';
    }
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out.front()))) out = "n_" + out;
    return out;
}

struct Branch {
    std::string layer;
    std::int64_t level = 1;
    std::string label;
};

class NetworkEmitter {
public:
    NetworkEmitter(const LabeledGraph& g, ConcatPolicy policy, std::vector<ConcatSite>* sites)
        : g_(g), policy_(policy), sites_(sites) {
        net_.name = "spdnn";
        net_.input = g.input;
        layer_of_[g.input_id] = std::string(kInputId);
        level_of_[g.input_id] = 1;
        taken_.insert(std::string(kInputId));
    }

    NetworkTopology emit() {
        for (const auto& n : g_.nodes)
            if (n.id != g_.input_id) visit(n);
        validate(net_);
        try {
            infer_shapes(net_);
        } catch (const ShapeError& e) {
            throw ShapeError(std::string("merged network failed shape inference: ") + e.what(),
                             e.node_id());
        }
        return std::move(net_);
    }

private:
    std::string fresh_id(const std::string& base) {
        std::string id = sanitize(base);
        for (int k = 2; taken_.count(id); ++k) id = sanitize(base) + "_" + std::to_string(k);
        taken_.insert(id);
        return id;
    }

    std::string add(const std::string& base, LayerSpec spec, std::vector<std::string> inputs) {
        auto id = fresh_id(base);
        net_.nodes.push_back({id, std::move(spec), std::move(inputs)});
        return id;
    }

    // Pool or unpool `layer` from one pool level to another.
    std::string adapt(const std::string& layer, std::int64_t from, std::int64_t to,
                      const std::string& base, const std::string& consumer) {
        if (from == to) return layer;
        auto hi = std::max(from, to), lo = std::min(from, to);
        if (hi % lo != 0)
            throw ValidationError("pool factors " + std::to_string(from) + " and " +
                                      std::to_string(to) + " have no integer ratio",
                                  consumer);
        int f = static_cast<int>(hi / lo);
        if (to > from) return add(base + "_pool" + std::to_string(f), MaxPoolSpec{f}, {layer});
        return add(base + "_unpool" + std::to_string(f), UnpoolSpec{f}, {layer});
    }

    Branch branch_for(const GraphEdge& e) {
        const auto& pred = g_.node(e.from);
        Branch b{layer_of_.at(e.from), level_of_.at(e.from), full_label(pred)};
        if (e.reshape) {
            const auto& t = *e.reshape;
            if (g_.input.height % t.height != 0 || g_.input.height / t.height != g_.input.width / t.width ||
                g_.input.width % t.width != 0)
                throw ValidationError("reshape target " + to_string(t) +
                                          " is not an integer pooling of the input",
                                      e.to);
            auto key = b.layer + "|" + to_string(t);
            auto it = reshapes_.find(key);
            if (it == reshapes_.end())
                it = reshapes_.emplace(key, add(b.layer + "_reshape", ReshapeSpec{t}, {b.layer})).first;
            b.layer = it->second;
            b.level = g_.input.height / t.height;
        }
        return b;
    }

    // With several branches the sigmoid moves to merge_out; a sigmoid head
    // that only feeds the output becomes linear so merge_out sees raw scores.
    void demote_heads(const GraphNode& out) {
        for (const auto* e : g_.in_edges(out.id)) {
            if (g_.out_edges(e->from).size() != 1) continue;
            const auto& id = layer_of_.at(e->from);
            for (auto& node : net_.nodes) {
                if (node.id != id) continue;
                if (auto* c = std::get_if<ConvSpec>(&node.spec); c && c->activation == Activation::Sigmoid)
                    c->activation = Activation::None;
            }
        }
    }

    void visit(const GraphNode& n) {
        const bool is_out = n.structure.kind == GraphNodeKind::Output;
        const bool is_dense = n.structure.kind == GraphNodeKind::Dense;
        const std::string base = is_out ? "output" : sanitize(n.id);

        std::vector<Branch> branches;
        for (const auto* e : g_.in_edges(n.id)) branches.push_back(branch_for(*e));
        std::stable_sort(branches.begin(), branches.end(), [](const Branch& a, const Branch& b) {
            return a.level != b.level ? a.level < b.level : a.label < b.label;
        });

        if (is_out && branches.size() > 1) demote_heads(n);

        std::string feed;
        std::int64_t level = 1;
        if (branches.size() == 1) {
            feed = branches.front().layer;
            level = branches.front().level;
        } else {
            Align align = Align::Up;
            if (!is_out) {
                if (policy_ == ConcatPolicy::Down || (policy_ == ConcatPolicy::Auto && is_dense))
                    align = Align::Down;
            }
            level = branches.front().level;
            for (const auto& b : branches)
                level = align == Align::Down ? std::max(level, b.level) : std::min(level, b.level);
            ConcatSite site;
            site.consumer = is_out ? "merge_out" : base;
            site.align = align;
            std::vector<std::string> inputs;
            for (std::size_t k = 0; k < branches.size(); ++k) {
                const auto& b = branches[k];
                inputs.push_back(adapt(b.layer, b.level, level,
                                       base + "_b" + std::to_string(k), n.id));
                site.pool_factors.push_back(static_cast<int>(b.level));
                site.predecessors.push_back(b.label);
            }
            feed = add(base + "_concat", ConcatSpec{align}, std::move(inputs));
            site.node_id = feed;
            if (sites_) sites_->push_back(std::move(site));
        }

        if (!is_dense) feed = adapt(feed, level, n.pool_factor, base + "_in", n.id);

        switch (n.structure.kind) {
        case GraphNodeKind::Conv: {
            ConvSpec s{n.structure.size, n.payload.channels, n.payload.padding,
                       n.payload.activation, n.payload.batch_norm};
            layer_of_[n.id] = add(base, s, {feed});
            level_of_[n.id] = n.pool_factor;
            break;
        }
        case GraphNodeKind::Dense: {
            DenseSpec s{n.structure.size, n.payload.activation, n.payload.dropout};
            layer_of_[n.id] = add(base, s, {feed});
            level_of_[n.id] = 1;
            break;
        }
        case GraphNodeKind::Output:
            if (branches.size() > 1)
                feed = add("merge_out", ConvSpec{1, 1, Padding::Same, Activation::Sigmoid, false},
                           {feed});
            add("output", OutputSpec{}, {feed});
            break;
        case GraphNodeKind::Input: break;
        }
    }

    const LabeledGraph& g_;
    ConcatPolicy policy_;
    std::vector<ConcatSite>* sites_;
    NetworkTopology net_;
    std::unordered_map<std::string, std::string> layer_of_;
    std::unordered_map<std::string, std::int64_t> level_of_;
    std::unordered_map<std::string, std::string> reshapes_;
    std::unordered_set<std::string> taken_;
};

} // namespace

NetworkTopology to_network(const LabeledGraph& g, ConcatPolicy policy,
                           std::vector<ConcatSite>* sites) {
    validate(g);
    return NetworkEmitter(g, policy, sites).emit();
}

MergeResult spdnn_merge(const std::vector<NetworkTopology>& nets, ConcatPolicy policy) {
    if (nets.size() < 2)
        throw ValidationError("merge needs at least two networks, got " +
                              std::to_string(nets.size()));
    for (const auto& n : nets)
        if (n.input != nets.front().input)
            throw ValidationError("network '" + n.name + "' input " + to_string(n.input) +
                                  " differs from '" + nets.front().name + "' input " +
                                  to_string(nets.front().input));

    std::vector<LabeledGraph> graphs;
    graphs.reserve(nets.size());
    for (const auto& n : nets) graphs.push_back(to_graph(n));

    auto contracted = contract(parallelize(graphs));
    MergeResult result;
    result.network = to_network(contracted.graph, policy, &contracted.report.concat_sites);
    result.report = std::move(contracted.report);
    return result;
}

} // namespace spdnn
