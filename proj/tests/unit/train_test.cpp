#include "spdnn/error.hpp"
#include "spdnn/optimizer.hpp"
#include "spdnn/train.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace spdnn;

TEST(Optimizer, NesterovOnQuadratic) {
    // f(x) = x^2 / 2, grad = x. Two steps by hand with lr 0.1, mu 0.9.
    ParamStore p{{"x", Tensor({1}, {1.0})}};
    OptimizerConfig cfg{0.1, 0.9, {}};
    auto ahead = lookahead(p, cfg);
    EXPECT_DOUBLE_EQ(ahead.at("x")[0], 1.0);
    nesterov_step(p, ahead, cfg);
    EXPECT_DOUBLE_EQ(cfg.velocity.at("x")[0], -0.1);
    EXPECT_DOUBLE_EQ(p.at("x")[0], 0.9);
    ahead = lookahead(p, cfg);
    EXPECT_DOUBLE_EQ(ahead.at("x")[0], 0.9 - 0.09);
    nesterov_step(p, ahead, cfg);
    EXPECT_NEAR(cfg.velocity.at("x")[0], 0.9 * -0.1 - 0.1 * 0.81, 1e-15);
    EXPECT_NEAR(p.at("x")[0], 0.9 - 0.171, 1e-15);
}

TEST(Optimizer, ConvergesOnQuadratic) {
    ParamStore p{{"x", Tensor({2}, {3.0, -2.0})}};
    OptimizerConfig cfg{0.05, 0.9, {}};
    for (int i = 0; i < 500; ++i) nesterov_step(p, lookahead(p, cfg), cfg);
    EXPECT_NEAR(p.at("x")[0], 0.0, 1e-6);
    EXPECT_NEAR(p.at("x")[1], 0.0, 1e-6);
}

TEST(Train, DemoTaskIsSeededAndNormalised) {
    const auto a = make_demo_task({1, 16, 20}, 3, 4);
    const auto b = make_demo_task({1, 16, 20}, 3, 4);
    ASSERT_EQ(a.inputs.size(), 3u);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.targets, b.targets);
    EXPECT_NE(a.inputs, make_demo_task({1, 16, 20}, 3, 5).inputs);
    for (const auto& t : a.targets) {
        EXPECT_EQ(t.shape(), (std::vector<std::size_t>{1, 16, 20}));
        for (double v : t.data()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Train, SmallRunLowersLossDeterministically) {
    const auto net = with_input_size(fixtures()[1], 16, 16);
    TrainConfig cfg;
    cfg.steps = 40;
    cfg.samples = 2;
    const auto a = train_demo(net, cfg);
    ASSERT_EQ(a.losses.size(), 41u);
    EXPECT_LT(a.losses.back(), a.losses.front());
    const auto b = train_demo(net, cfg);
    EXPECT_EQ(a.losses, b.losses);
    EXPECT_EQ(a.params, b.params);
}

TEST(Train, DivergenceIsReported) {
    // Linear head, so nothing saturates and a huge step overflows.
    NetworkTopology net{"lin", {1, 8, 8}, {}};
    net.nodes.push_back({"c", ConvSpec{3, 1, Padding::Same, Activation::None, false}, {"input"}});
    net.nodes.push_back({"output", OutputSpec{}, {"c"}});
    TrainConfig cfg;
    cfg.steps = 100;
    cfg.learning_rate = 1e6;
    try {
        train_demo(net, cfg);
        FAIL() << "expected divergence";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(Train, NeedsSingleChannelOutput) {
    NetworkTopology net{"w", {1, 8, 8}, {}};
    net.nodes.push_back({"c", ConvSpec{1, 2, Padding::Same, Activation::None, false}, {"input"}});
    net.nodes.push_back({"output", OutputSpec{}, {"c"}});
    EXPECT_THROW(train_demo(net, {}), ShapeError);
}
