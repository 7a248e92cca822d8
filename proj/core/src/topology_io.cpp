// JSON topology reader/writer.

#include "spdnn/error.hpp"
#include "spdnn/topology.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <set>

namespace spdnn {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::array kKnownNodeKeys = {"id",      "op",         "inputs",   "kernel",
                                       "channels", "units",     "factor",   "padding",
                                       "activation", "batchnorm", "dropout", "align",
                                       "shape"};

std::set<std::string> allowed_keys(LayerKind kind) {
    std::set<std::string> keys{"id", "op", "inputs"};
    switch (kind) {
    case LayerKind::Conv: keys.insert({"kernel", "channels", "padding", "activation", "batchnorm"}); break;
    case LayerKind::Dense: keys.insert({"units", "activation", "dropout"}); break;
    case LayerKind::MaxPool:
    case LayerKind::Unpool: keys.insert("factor"); break;
    case LayerKind::Concat: keys.insert("align"); break;
    case LayerKind::Reshape: keys.insert("shape"); break;
    case LayerKind::Output: break;
    }
    return keys;
}

LayerKind parse_op(const std::string& op, const std::string& id) {
    for (auto k : {LayerKind::Conv, LayerKind::Dense, LayerKind::MaxPool, LayerKind::Unpool,
                   LayerKind::Concat, LayerKind::Reshape, LayerKind::Output})
        if (op_name(k) == op) return k;
    throw ValidationError("unknown op '" + op + "'", id);
}

int get_int(const json& j, const char* key, const std::string& id) {
    if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'", id);
    const auto& v = j.at(key);
    if (!v.is_number_integer())
        throw ValidationError(std::string("field '") + key + "' must be an integer", id);
    auto x = v.get<long long>();
    if (x < 1 || x > (1LL << 30))
        throw ValidationError(std::string("field '") + key + "' out of range", id);
    return static_cast<int>(x);
}

std::string get_string(const json& j, const char* key, const std::string& id) {
    const auto& v = j.at(key);
    if (!v.is_string())
        throw ValidationError(std::string("field '") + key + "' must be a string", id);
    return v.get<std::string>();
}

Activation get_activation(const json& j, const std::string& id) {
    if (!j.contains("activation")) return Activation::None;
    auto s = get_string(j, "activation", id);
    if (s == "none") return Activation::None;
    if (s == "relu") return Activation::ReLU;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ValidationError("unknown activation '" + s + "'", id);
}

Shape3 get_shape(const json& v, const std::string& what, const std::string& id) {
    if (!v.is_array() || v.size() != 3)
        throw ValidationError(what + " must be an array [C,H,W]", id);
    std::array<std::int64_t, 3> dims{};
    for (std::size_t i = 0; i < 3; ++i) {
        if (!v[i].is_number_integer() || v[i].get<long long>() < 1)
            throw ValidationError(what + " entries must be positive integers", id);
        dims[i] = v[i].get<std::int64_t>();
    }
    return {dims[0], dims[1], dims[2]};
}

Node parse_node(const json& j, const std::string& previous) {
    if (!j.is_object()) throw ValidationError("node entries must be objects");
    if (!j.contains("id") || !j.at("id").is_string())
        throw ValidationError("node without a string 'id'");
    std::string id = j.at("id").get<std::string>();
    if (!j.contains("op")) throw ValidationError("missing field 'op'", id);
    auto kind = parse_op(get_string(j, "op", id), id);

    auto allowed = allowed_keys(kind);
    for (const auto& [key, _] : j.items()) {
        if (allowed.count(key)) continue;
        bool known = std::find(kKnownNodeKeys.begin(), kKnownNodeKeys.end(), key) !=
                     kKnownNodeKeys.end();
        throw ValidationError(known ? "field '" + key + "' is not valid for op '" +
                                          std::string(op_name(kind)) + "'"
                                    : "unknown key '" + key + "'",
                              id);
    }

    Node node;
    node.id = id;
    if (j.contains("inputs")) {
        const auto& ins = j.at("inputs");
        if (!ins.is_array()) throw ValidationError("'inputs' must be an array", id);
        for (const auto& in : ins) {
            if (!in.is_string()) throw ValidationError("'inputs' entries must be strings", id);
            node.inputs.push_back(in.get<std::string>());
        }
    } else {
        node.inputs.push_back(previous);
    }

    switch (kind) {
    case LayerKind::Conv: {
        ConvSpec s;
        s.kernel = get_int(j, "kernel", id);
        s.channels = get_int(j, "channels", id);
        if (j.contains("padding")) {
            auto p = get_string(j, "padding", id);
            if (p == "same") s.padding = Padding::Same;
            else if (p == "valid") s.padding = Padding::Valid;
            else throw ValidationError("unknown padding '" + p + "'", id);
        }
        s.activation = get_activation(j, id);
        if (j.contains("batchnorm")) {
            if (!j.at("batchnorm").is_boolean())
                throw ValidationError("'batchnorm' must be a boolean", id);
            s.batch_norm = j.at("batchnorm").get<bool>();
        }
        node.spec = s;
        break;
    }
    case LayerKind::Dense: {
        DenseSpec s;
        s.units = get_int(j, "units", id);
        s.activation = get_activation(j, id);
        if (j.contains("dropout")) {
            if (!j.at("dropout").is_number()) throw ValidationError("'dropout' must be a number", id);
            s.dropout = j.at("dropout").get<double>();
        }
        node.spec = s;
        break;
    }
    case LayerKind::MaxPool: node.spec = MaxPoolSpec{get_int(j, "factor", id)}; break;
    case LayerKind::Unpool: node.spec = UnpoolSpec{get_int(j, "factor", id)}; break;
    case LayerKind::Concat: {
        ConcatSpec s;
        if (j.contains("align")) {
            auto a = get_string(j, "align", id);
            if (a == "up") s.align = Align::Up;
            else if (a == "down") s.align = Align::Down;
            else throw ValidationError("unknown align '" + a + "'", id);
        }
        node.spec = s;
        break;
    }
    case LayerKind::Reshape:
        if (!j.contains("shape")) throw ValidationError("missing field 'shape'", id);
        node.spec = ReshapeSpec{get_shape(j.at("shape"), "'shape'", id)};
        break;
    case LayerKind::Output: node.spec = OutputSpec{}; break;
    }
    return node;
}

ordered_json node_to_json(const Node& n) {
    ordered_json j;
    j["id"] = n.id;
    j["op"] = std::string(op_name(n.kind()));
    j["inputs"] = n.inputs;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ConvSpec>) {
                j["kernel"] = s.kernel;
                j["channels"] = s.channels;
                j["padding"] = std::string(to_string(s.padding));
                j["activation"] = std::string(to_string(s.activation));
                j["batchnorm"] = s.batch_norm;
            } else if constexpr (std::is_same_v<T, DenseSpec>) {
                j["units"] = s.units;
                j["activation"] = std::string(to_string(s.activation));
                j["dropout"] = s.dropout;
            } else if constexpr (std::is_same_v<T, MaxPoolSpec> || std::is_same_v<T, UnpoolSpec>) {
                j["factor"] = s.factor;
            } else if constexpr (std::is_same_v<T, ConcatSpec>) {
                j["align"] = std::string(to_string(s.align));
            } else if constexpr (std::is_same_v<T, ReshapeSpec>) {
                j["shape"] = {s.target.channels, s.target.height, s.target.width};
            }
        },
        n.spec);
    return j;
}

} // namespace

NetworkTopology parse_topology(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("topology syntax error: " + std::string(e.what()), e.byte);
    }

    if (!doc.is_object()) throw ValidationError("topology must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (key != "name" && key != "input" && key != "nodes")
            throw ValidationError("unknown top-level key '" + key + "'");
    if (!doc.contains("name") || !doc.at("name").is_string())
        throw ValidationError("missing string field 'name'");
    if (!doc.contains("input")) throw ValidationError("missing field 'input'");
    if (!doc.contains("nodes") || !doc.at("nodes").is_array())
        throw ValidationError("missing array field 'nodes'");

    NetworkTopology net;
    net.name = doc.at("name").get<std::string>();
    net.input = get_shape(doc.at("input"), "'input'", {});
    std::string previous(kInputId);
    for (const auto& jn : doc.at("nodes")) {
        net.nodes.push_back(parse_node(jn, previous));
        previous = net.nodes.back().id;
    }
    validate(net);
    return net;
}

std::string serialize_topology(const NetworkTopology& net) {
    auto ordered = canonical_order(net);
    std::string out = "{\n";
    out += "  \"name\": " + json(net.name).dump() + ",\n";
    out += "  \"input\": [" + std::to_string(net.input.channels) + ", " +
           std::to_string(net.input.height) + ", " + std::to_string(net.input.width) + "],\n";
    out += "  \"nodes\": [";
    for (std::size_t i = 0; i < ordered.nodes.size(); ++i) {
        out += i == 0 ? "\n    " : ",\n    ";
        out += node_to_json(ordered.nodes[i]).dump();
    }
    out += "\n  ]\n}\n";
    return out;
}

} // namespace spdnn
