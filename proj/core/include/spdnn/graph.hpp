#pragma once

#include "spdnn/topology.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spdnn {

enum class GraphNodeKind { Input, Conv, Dense, Output };

/// Layer structure part of a label: "3C" for a 3x3 convolution, "30F" for
/// a 30-unit fully connected layer, "IN" and "OUT" for the terminals.
struct Structure {
    GraphNodeKind kind = GraphNodeKind::Input;
    int size = 0; // kernel side or unit count

    friend bool operator==(const Structure&, const Structure&) = default;
};

std::string to_string(const Structure& s);

/// Layer attributes that do not appear in the label but must agree when
/// equally-labelled nodes are merged.
struct LayerPayload {
    int channels = 0;
    Padding padding = Padding::Same;
    Activation activation = Activation::None;
    bool batch_norm = false;
    double dropout = 0.0;

    friend bool operator==(const LayerPayload&, const LayerPayload&) = default;
};

/// (network name, node id) of a source layer.
using Origin = std::pair<std::string, std::string>;

struct GraphNode {
    std::string id;
    Structure structure;
    /// Accumulated pooling of the data entering the node. Always 1 for
    /// fully connected nodes.
    int pool_factor = 1;
    /// Distance from the input node in layers; pooling layers do not count.
    int depth = 0;
    LayerPayload payload;
    std::set<Origin> origin;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

/// "<structure><p>P,<depth>", the P part omitted when the pool factor is 1.
/// The terminals are labelled "IN" and "OUT".
std::string full_label(const GraphNode& n);

struct GraphEdge {
    std::string from;
    std::string to;
    /// Reshape the source network applied between the two layers, if any.
    std::optional<Shape3> reshape;

    friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

inline constexpr std::string_view kGraphInputId = "@in";
inline constexpr std::string_view kGraphOutputId = "@out";

/// A network in labelled-graph form. Nodes are stored in topological order,
/// input first and output last.
struct LabeledGraph {
    std::string name;
    Shape3 input;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    std::string input_id{kGraphInputId};
    std::string output_id{kGraphOutputId};

    const GraphNode& node(std::string_view id) const;
    std::vector<const GraphEdge*> in_edges(std::string_view id) const;
    std::vector<const GraphEdge*> out_edges(std::string_view id) const;

    /// Layer nodes only (terminals excluded).
    std::size_t internal_count() const noexcept;

    friend bool operator==(const LabeledGraph&, const LabeledGraph&) = default;
};

/// Throws ValidationError unless the graph is acyclic with a single input
/// and output and every node lies on an input-to-output path.
void validate(const LabeledGraph& g);

/// Converts a validated topology into its labelled graph. Pooling,
/// unpooling, reshape and concat layers become edge properties rather than
/// nodes; the pool factor is multiplied at max-pooling, divided at
/// unpooling and reset by fully connected layers.
LabeledGraph to_graph(const NetworkTopology& net);

/// Graphviz digraph with one node per graph node, text = full label.
std::string to_dot(const LabeledGraph& g);

} // namespace spdnn
