#include "oracles.hpp"

#include "spdnn/error.hpp"
#include "spdnn/merge.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

using namespace spdnn;

namespace {

LabeledGraph merged_graph(const std::vector<NetworkTopology>& nets) {
    std::vector<LabeledGraph> graphs;
    for (const auto& n : nets) graphs.push_back(to_graph(n));
    return contract(parallelize(graphs)).graph;
}

} // namespace

TEST(Merge, GoldenContractionMatchesOracle) {
    const auto nets = fixtures();
    std::vector<LabeledGraph> graphs;
    for (const auto& n : nets) graphs.push_back(to_graph(n));
    const auto c = contract(parallelize(graphs));
    const auto expected = oracle::group_by_label(nets);

    EXPECT_EQ(c.report.source_nodes, 44u);
    EXPECT_EQ(c.report.merged_nodes, 17u);
    EXPECT_EQ(expected.source_nodes, 44u);
    EXPECT_EQ(expected.groups.size(), 17u);
    EXPECT_EQ(c.graph.internal_count(), 17u);

    std::map<int, std::size_t> per_depth;
    for (const auto& n : c.graph.nodes)
        if (n.structure.kind == GraphNodeKind::Conv || n.structure.kind == GraphNodeKind::Dense)
            ++per_depth[n.depth];
    EXPECT_EQ(per_depth, expected.per_depth);
    EXPECT_EQ(per_depth, (std::map<int, std::size_t>{{1, 1}, {2, 4}, {3, 4}, {4, 5}, {5, 2}, {6, 1}}));

    ASSERT_EQ(c.report.groups.size(), 17u);
    for (const auto& g : c.report.groups) {
        std::set<std::string> members;
        for (const auto& [net, node] : g.origins) members.insert(net + "/" + node);
        EXPECT_EQ(members, expected.groups.at(g.label)) << g.label;
    }
    EXPECT_EQ(expected.groups.at("3C,1").size(), 8u);
    EXPECT_EQ(expected.groups.count("3C2P,4"), 1u);
}

TEST(Merge, ContractionIsIdempotent) {
    const auto g = merged_graph(fixtures());
    EXPECT_EQ(contract(g).graph, g);
}

TEST(Merge, MergedFixtureShapes) {
    std::vector<ConcatSite> sites;
    std::vector<LabeledGraph> graphs;
    for (const auto& n : fixtures()) graphs.push_back(to_graph(n));
    const auto net = to_network(contract(parallelize(graphs)).graph, ConcatPolicy::Auto, &sites);
    EXPECT_EQ(infer_shapes(net).at(net.output_node().id), (Shape3{1, 80, 264}));
    EXPECT_EQ(net.name, "spdnn");
    EXPECT_FALSE(sites.empty());
    for (const auto& s : sites) {
        EXPECT_EQ(s.pool_factors.size(), s.predecessors.size());
        EXPECT_GE(s.pool_factors.size(), 2u);
    }
}

TEST(Merge, IdenticalNetsCollapseToOne) {
    for (const auto& net : fixtures()) {
        auto twin = net;
        twin.name = "twin";
        const auto merged = spdnn_merge({net, twin});
        EXPECT_TRUE(same_structure(merged.network, net)) << net.name << "\n"
                                                         << serialize_topology(merged.network);
        EXPECT_EQ(merged.report.merged_nodes * 2, merged.report.source_nodes);
    }
}

TEST(Merge, PoliciesChangeAlignment) {
    const auto nets = fixtures();
    const std::vector<NetworkTopology> convs(nets.begin(), nets.begin() + 4);
    for (auto policy : {ConcatPolicy::Auto, ConcatPolicy::Up, ConcatPolicy::Down}) {
        const auto m = spdnn_merge(convs, policy);
        EXPECT_EQ(infer_shapes(m.network).at("output"), (Shape3{1, 80, 264})) << to_string(policy);
        for (const auto& s : m.report.concat_sites) {
            if (s.node_id.rfind("output", 0) == 0) continue;
            if (policy == ConcatPolicy::Up) {
                EXPECT_EQ(s.align, Align::Up);
            }
            if (policy == ConcatPolicy::Down) {
                EXPECT_EQ(s.align, Align::Down);
            }
        }
    }
    EXPECT_EQ(parse_policy("down"), ConcatPolicy::Down);
    EXPECT_FALSE(parse_policy("sideways").has_value());
}

TEST(Merge, OnlyMergeOutKeepsTheSigmoid) {
    const auto net = spdnn_merge(fixtures()).network;
    std::vector<std::string> sigmoid;
    for (const auto& n : net.nodes)
        if (const auto* c = std::get_if<ConvSpec>(&n.spec); c && c->activation == Activation::Sigmoid)
            sigmoid.push_back(n.id);
    EXPECT_EQ(sigmoid, std::vector<std::string>{"merge_out"});
}

TEST(Merge, RejectsMismatchedInputs) {
    auto nets = fixtures();
    nets[1] = with_input_size(nets[1], 40, 40);
    try {
        spdnn_merge(nets);
        FAIL();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("net1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("net2"), std::string::npos) << msg;
    }
    EXPECT_THROW(spdnn_merge({fixtures()[0]}), ValidationError);
}

TEST(Merge, PayloadConflictIsReported) {
    auto a = fixtures()[0];
    auto b = fixtures()[1];
    b.name = "other";
    std::get<ConvSpec>(b.nodes[0].spec).channels = 16;
    EXPECT_THROW(spdnn_merge({a, b}), ValidationError);
}

TEST(Merge, ReportJson) {
    const auto m = spdnn_merge(fixtures());
    const auto j = nlohmann::json::parse(to_json(m.report));
    EXPECT_EQ(j.at("source_nodes"), 44);
    EXPECT_EQ(j.at("merged_nodes"), 17);
    EXPECT_EQ(j.at("groups").size(), 17u);
    EXPECT_EQ(j.at("concat_sites").size(), m.report.concat_sites.size());
}

TEST(Merge, RandomSetsKeepEverySourcePath) {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const int count = std::uniform_int_distribution<int>(2, 8)(gen);
        std::vector<NetworkTopology> nets;
        for (int i = 0; i < count; ++i)
            nets.push_back(oracle::random_sequential(gen, "n" + std::to_string(i)));
        std::vector<LabeledGraph> graphs;
        for (const auto& n : nets) graphs.push_back(to_graph(n));
        const auto c = contract(parallelize(graphs));
        for (const auto& g : graphs)
            EXPECT_TRUE(oracle::has_label_path(c.graph, oracle::label_path(g))) << trial;
        EXPECT_EQ(contract(c.graph).graph, c.graph);
        EXPECT_EQ(c.report.merged_nodes, oracle::group_by_label(nets).groups.size());

        const auto net = to_network(c.graph);
        std::size_t source_layers = 0;
        for (const auto& n : nets) source_layers += oracle::weighted_layers(n);
        EXPECT_LE(oracle::weighted_layers(net), source_layers + 1) << trial;
        EXPECT_EQ(infer_shapes(net).at("output"), (Shape3{1, 48, 48}));
    }
}
