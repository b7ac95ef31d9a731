// Generates a small dataset in memory, trains a tiny model for a few epochs and prints
// the per-weather estimate for one held-out image.

#include "copresence/dataset.hpp"
#include "copresence/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

int main() {
    using namespace copresence;

    data::DatasetConfig dc;
    dc.count = 240;
    dc.image_size = 32;
    auto generated = data::generate_in_memory(dc, sim::default_membership_config());
    data::Dataset ds{"", generated.categories, std::move(generated.samples)};

    train::TrainConfig tc;
    tc.epochs = 3;
    tc.learning_rate = 1e-3;
    auto result = train::train(tc, ds, [](const nlohmann::json& j) { std::printf("%s\n", j.dump().c_str()); });

    const auto test = ds.split("test");
    const auto& sample = *test.front();
    const auto out = result.model.forward_infer(sample.image);

    std::vector<std::size_t> order(out.prediction.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return out.prediction[a] > out.prediction[b]; });
    std::printf("%-12s %10s %10s\n", "weather", "estimate", "truth");
    for (std::size_t i : order) {
        std::printf("%-12s %10.4f %10.4f\n", ds.categories[i].c_str(), out.prediction[i], sample.label_prob[i]);
    }
    std::printf("uncertainty score %.4f\n", out.uncertainty);
    return 0;
}
