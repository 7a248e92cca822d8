#include "spdnn/error.hpp"

#include <utility>

namespace spdnn {

ParseError::ParseError(const std::string& what, std::size_t offset)
    : Error(Category::Parse, what + " (at byte " + std::to_string(offset) + ")"),
      offset_(offset), has_offset_(true) {}

ParseError::ParseError(const std::string& what) : Error(Category::Parse, what) {}

namespace {
std::string with_node(const std::string& what, const std::string& node) {
    return node.empty() ? what : "node '" + node + "': " + what;
}
} // namespace

ValidationError::ValidationError(const std::string& what, std::string node_id)
    : Error(Category::Validation, with_node(what, node_id)), node_id_(std::move(node_id)) {}

ShapeError::ShapeError(const std::string& what, std::string node_id)
    : Error(Category::Shape, with_node(what, node_id)), node_id_(std::move(node_id)) {}

} // namespace spdnn
