#include "oracles.hpp"

#include "spdnn/error.hpp"
#include "spdnn/graph.hpp"

#include <gtest/gtest.h>

using namespace spdnn;

TEST(Graph, Net2Labels) {
    const auto g = to_graph(fixtures()[1]);
    EXPECT_EQ(oracle::label_path(g),
              (std::vector<std::string>{"IN", "3C,1", "3C2P,2", "3C2P,3", "3C2P,4", "1C,5", "OUT"}));
    EXPECT_EQ(g.internal_count(), 5u);
    EXPECT_EQ(g.node("conv4").origin, (std::set<Origin>{{"net2", "conv4"}}));
    EXPECT_NO_THROW(validate(g));
}

TEST(Graph, LabelsMatchOracleOnFixtures) {
    for (const auto& net : fixtures()) {
        const auto g = to_graph(net);
        const auto expected = oracle::oracle_labels(net);
        EXPECT_EQ(g.internal_count(), expected.size()) << net.name;
        for (const auto& [id, label] : expected) EXPECT_EQ(full_label(g.node(id)), label) << net.name;
    }
}

TEST(Graph, DenseResetsPoolAndReshapeSitsOnEdge) {
    const auto g = to_graph(fixtures()[6]);
    EXPECT_EQ(full_label(g.node("dense1")), "32F,4");
    EXPECT_EQ(full_label(g.node("dense2")), "330F,5");
    EXPECT_EQ(full_label(g.node("conv_out")), "1C,6");
    const auto in = g.in_edges("conv_out");
    ASSERT_EQ(in.size(), 1u);
    ASSERT_TRUE(in.front()->reshape.has_value());
    EXPECT_EQ(*in.front()->reshape, (Shape3{1, 10, 33}));
}

TEST(Graph, DotExport) {
    const auto dot = to_dot(to_graph(fixtures()[1]));
    EXPECT_EQ(dot.rfind("digraph \"net2\" {", 0), 0u);
    EXPECT_NE(dot.find("label=\"3C2P,4\""), std::string::npos);
    EXPECT_NE(dot.find("\"conv3\" -> \"conv4\""), std::string::npos);
    EXPECT_EQ(dot.back(), '\n');
}

TEST(Graph, UnpoolMustDivide) {
    NetworkTopology net{"u", {1, 8, 8}, {}};
    net.nodes.push_back({"c", ConvSpec{3, 1, Padding::Same, Activation::None, false}, {"input"}});
    net.nodes.push_back({"up", UnpoolSpec{2}, {"c"}});
    net.nodes.push_back({"c2", ConvSpec{3, 1, Padding::Same, Activation::None, false}, {"up"}});
    net.nodes.push_back({"output", OutputSpec{}, {"c2"}});
    EXPECT_THROW(to_graph(net), Error);
}

TEST(Graph, ValidateRejectsBrokenGraphs) {
    auto g = to_graph(fixtures()[0]);
    auto dangling = g;
    dangling.edges.pop_back();
    EXPECT_THROW(validate(dangling), ValidationError);
    auto backwards = g;
    std::swap(backwards.edges.front().from, backwards.edges.front().to);
    EXPECT_THROW(validate(backwards), ValidationError);
}

TEST(Graph, ConcatIsTransparent) {
    NetworkTopology net{"b", {1, 16, 16}, {}};
    auto conv = [](int k) { return ConvSpec{k, 4, Padding::Same, Activation::ReLU, true}; };
    net.nodes.push_back({"a", conv(3), {"input"}});
    net.nodes.push_back({"p", MaxPoolSpec{2}, {"a"}});
    net.nodes.push_back({"b", conv(5), {"p"}});
    net.nodes.push_back({"cat", ConcatSpec{Align::Up}, {"a", "b"}});
    net.nodes.push_back({"c", conv(3), {"cat"}});
    net.nodes.push_back({"output", OutputSpec{}, {"c"}});
    const auto g = to_graph(net);
    EXPECT_EQ(full_label(g.node("c")), "3C,3");
    EXPECT_EQ(g.in_edges("c").size(), 2u);
    EXPECT_EQ(oracle::oracle_labels(net).at("c"), "3C,3");
}
