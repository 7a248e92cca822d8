// The eight source networks: four fully convolutional (no pooling, then
// 2/4/8 max-pooling) and four with a fully connected bottleneck.

#include "spdnn/error.hpp"
#include "spdnn/topology.hpp"

namespace spdnn {

namespace {

class Builder {
public:
    Builder(std::string name, std::int64_t height, std::int64_t width)
        : net_{std::move(name), {1, height, width}, {}} {}

    Builder& add(std::string id, LayerSpec spec) {
        std::string prev = net_.nodes.empty() ? std::string(kInputId) : net_.nodes.back().id;
        net_.nodes.push_back({std::move(id), std::move(spec), {std::move(prev)}});
        return *this;
    }

    Builder& conv(std::string id) {
        return add(std::move(id), ConvSpec{3, 8, Padding::Same, Activation::ReLU, true});
    }

    Builder& head() {
        add("conv_out", ConvSpec{1, 1, Padding::Same, Activation::Sigmoid, false});
        return add("output", OutputSpec{});
    }

    NetworkTopology build() { return std::move(net_); }

private:
    NetworkTopology net_;
};

NetworkTopology conv_net(int index, int pool, std::int64_t h, std::int64_t w) {
    Builder b("net" + std::to_string(index), h, w);
    b.conv("conv1");
    if (pool > 1) b.add("pool1", MaxPoolSpec{pool});
    b.conv("conv2").conv("conv3").conv("conv4");
    if (pool > 1) b.add("unpool1", UnpoolSpec{pool});
    return b.head().build();
}

NetworkTopology dense_net(int index, int pool, std::int64_t h, std::int64_t w) {
    Builder b("net" + std::to_string(index), h, w);
    b.conv("conv1");
    if (pool > 1) b.add("pool1", MaxPoolSpec{pool});
    b.conv("conv2").conv("conv3");
    const auto bottleneck = static_cast<int>((h / 8) * (w / 8));
    b.add("dense1", DenseSpec{32, Activation::ReLU, 0.5});
    b.add("dense2", DenseSpec{bottleneck, Activation::ReLU, 0.0});
    b.add("reshape1", ReshapeSpec{{1, h / 8, w / 8}});
    b.add("unpool1", UnpoolSpec{8});
    return b.head().build();
}

} // namespace

std::vector<NetworkTopology> fixtures(std::int64_t height, std::int64_t width) {
    if (height < 8 || width < 8 || height % 8 != 0 || width % 8 != 0)
        throw ValidationError("fixture size " + std::to_string(height) + "x" +
                              std::to_string(width) + " must be positive multiples of 8");
    std::vector<NetworkTopology> nets;
    const int pools[] = {1, 2, 4, 8};
    for (int i = 0; i < 4; ++i) nets.push_back(conv_net(i + 1, pools[i], height, width));
    for (int i = 0; i < 4; ++i) nets.push_back(dense_net(i + 5, pools[i], height, width));
    return nets;
}

} // namespace spdnn
