#pragma once

#include "spdnn/graph.hpp"
#include "spdnn/topology.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spdnn {

/// How branches with different pool factors are brought to one spatial
/// size before concatenation. Auto pools down in front of fully connected
/// consumers and unpools up in front of convolutions.
enum class ConcatPolicy { Auto, Up, Down };

std::string_view to_string(ConcatPolicy p) noexcept;
std::optional<ConcatPolicy> parse_policy(std::string_view s) noexcept;

/// A concatenation inserted while converting a merged graph back to layers.
struct ConcatSite {
    std::string node_id;  // the emitted concat layer
    std::string consumer; // layer fed by it
    Align align = Align::Up;
    std::vector<int> pool_factors;         // per branch, in channel order
    std::vector<std::string> predecessors; // branch labels, in channel order
};

struct MergeGroup {
    std::string label;
    std::vector<Origin> origins;
};

struct ContractionReport {
    std::size_t source_nodes = 0;
    std::size_t merged_nodes = 0;
    std::vector<MergeGroup> groups; // in merged-graph node order
    std::vector<ConcatSite> concat_sites;
};

/// JSON with keys source_nodes, merged_nodes, groups, concat_sites.
std::string to_json(const ContractionReport& report);

/// Puts the graphs side by side under one shared input and one shared
/// output node. Requires at least two graphs with equal input shapes.
LabeledGraph parallelize(const std::vector<LabeledGraph>& graphs);

struct Contraction {
    LabeledGraph graph;
    ContractionReport report;
};

/// Merges every group of equally-labelled nodes into a single node that
/// keeps the union of the members' connections. Idempotent.
Contraction contract(const LabeledGraph& g);

/// Converts a (contracted) graph back into an executable network. Pooling
/// layers are re-created from the pool-factor arithmetic of the labels and
/// multi-input nodes get a concat with aligning pool/unpool adapters. The
/// result is validated and shape-checked. `sites`, when given, receives
/// every concat that was inserted.
NetworkTopology to_network(const LabeledGraph& g, ConcatPolicy policy = ConcatPolicy::Auto,
                           std::vector<ConcatSite>* sites = nullptr);

struct MergeResult {
    NetworkTopology network;
    ContractionReport report;
};

/// The full pipeline: to_graph on every network, parallelize, contract,
/// to_network.
MergeResult spdnn_merge(const std::vector<NetworkTopology>& nets,
                        ConcatPolicy policy = ConcatPolicy::Auto);

} // namespace spdnn
