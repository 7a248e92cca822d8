#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace spdnn {

/// channels x height x width of one activation volume.
struct Shape3 {
    std::int64_t channels = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;

    std::int64_t elements() const noexcept { return channels * height * width; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Formats as "CxHxW" using the multiplication sign, e.g. "1×80×264".
std::string to_string(const Shape3& s);

enum class Padding { Same, Valid };
enum class Activation { None, ReLU, Sigmoid };
enum class Align { Up, Down };

std::string_view to_string(Padding p) noexcept;
std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Align a) noexcept;

struct ConvSpec {
    int kernel = 3;
    int channels = 1;
    Padding padding = Padding::Same;
    Activation activation = Activation::None;
    bool batch_norm = false;
    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct DenseSpec {
    int units = 1;
    Activation activation = Activation::None;
    double dropout = 0.0;
    friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};

struct MaxPoolSpec {
    int factor = 2;
    friend bool operator==(const MaxPoolSpec&, const MaxPoolSpec&) = default;
};

struct UnpoolSpec {
    int factor = 2;
    friend bool operator==(const UnpoolSpec&, const UnpoolSpec&) = default;
};

struct ConcatSpec {
    Align align = Align::Up;
    friend bool operator==(const ConcatSpec&, const ConcatSpec&) = default;
};

struct ReshapeSpec {
    Shape3 target;
    friend bool operator==(const ReshapeSpec&, const ReshapeSpec&) = default;
};

struct OutputSpec {
    friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

/// One layer's structural description. Each alternative holds exactly the
/// fields that are meaningful for its kind.
using LayerSpec = std::variant<ConvSpec, DenseSpec, MaxPoolSpec, UnpoolSpec, ConcatSpec,
                               ReshapeSpec, OutputSpec>;

enum class LayerKind { Conv, Dense, MaxPool, Unpool, Concat, Reshape, Output };

LayerKind kind_of(const LayerSpec& spec) noexcept;

/// JSON "op" spelling: "conv", "dense", "maxpool", ...
std::string_view op_name(LayerKind kind) noexcept;

/// Reserved id that node inputs use to refer to the network input.
inline constexpr std::string_view kInputId = "input";

struct Node {
    std::string id;
    LayerSpec spec;
    std::vector<std::string> inputs;

    LayerKind kind() const noexcept { return kind_of(spec); }
    friend bool operator==(const Node&, const Node&) = default;
};

/// A named DAG of layers fed by a single input volume.
struct NetworkTopology {
    std::string name;
    Shape3 input;
    std::vector<Node> nodes;

    const Node* find(std::string_view id) const noexcept;
    const Node& output_node() const;
    bool is_sequential() const noexcept;

    friend bool operator==(const NetworkTopology&, const NetworkTopology&) = default;
};

/// Identifier rule for node ids and network names: [A-Za-z_][A-Za-z0-9_.-]*
bool is_identifier(std::string_view s) noexcept;

/// Throws ValidationError naming the offending node for: duplicate or
/// malformed ids, unknown inputs, cycles, bad per-kind fields, nodes not on
/// an input-to-output path, or a number of Output nodes other than one.
void validate(const NetworkTopology& net);

/// Nodes reordered topologically; ties keep their original relative order.
/// Requires an acyclic network.
NetworkTopology canonical_order(const NetworkTopology& net);

/// Equality ignoring the network name and node ids: both networks are put
/// in canonical order and compared by layer spec and input positions.
bool same_structure(const NetworkTopology& a, const NetworkTopology& b);

/// Copy of `net` with the input height and width replaced.
NetworkTopology with_input_size(NetworkTopology net, std::int64_t height, std::int64_t width);

/// Per-node output shapes, in canonical node order.
class ShapeTable {
public:
    void add(std::string id, Shape3 shape);

    const Shape3& at(std::string_view id) const;
    const std::vector<std::pair<std::string, Shape3>>& entries() const noexcept {
        return entries_;
    }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<std::pair<std::string, Shape3>> entries_;
};

/// Shape inference over the whole network. Throws ShapeError naming the
/// node on divisibility, concat or reshape failures.
ShapeTable infer_shapes(const NetworkTopology& net);

/// Output shape of a single layer given its (already aligned) inputs.
Shape3 layer_output_shape(const Node& node, const std::vector<Shape3>& inputs);

/// Parses the JSON topology format and validates the result. Syntax errors
/// raise ParseError with the byte offset; semantic errors ValidationError.
NetworkTopology parse_topology(std::string_view text);

/// Canonical JSON text: nodes in topological order, keys in the fixed order
/// id, op, inputs, kernel, channels, units, factor, padding, activation,
/// batchnorm, dropout, align, shape. Ends with a newline.
std::string serialize_topology(const NetworkTopology& net);

inline constexpr std::int64_t kReferenceHeight = 80;
inline constexpr std::int64_t kReferenceWidth = 264;

/// The eight source networks at input 1xHxW. H and W must be divisible by 8.
std::vector<NetworkTopology> fixtures(std::int64_t height = kReferenceHeight,
                                      std::int64_t width = kReferenceWidth);

} // namespace spdnn
