#include "bagreg/datagen.hpp"

#include "bagreg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bagreg {

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Early: return "early";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "unknown";
}

std::size_t GammaConfig::count(Split split) const {
    switch (split) {
        case Split::Train: return n_train;
        case Split::Early: return n_early;
        case Split::Val: return n_val;
        case Split::Test: return n_test;
    }
    return 0;
}

void GammaConfig::validate() const {
    if (dim < 1) throw InvalidArgument("dimension must be at least 1");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw InvalidArgument("noise sd must be finite and >= 0");
    if (!(label_lo > 0.0 && label_hi > label_lo)) throw InvalidArgument("label range must satisfy 0 < lo < hi");
    if (const auto* f = std::get_if<FixedBagSize>(&bag_size)) {
        if (f->n < 1) throw InvalidArgument("fixed bag size must be at least 1");
    } else {
        const double s5 = std::get<MixedBagSizes>(bag_size).s5;
        if (!(s5 >= 0.0 && s5 <= 50.0)) throw InvalidArgument("s5 must lie in [0, 50]");
    }
}

const BagDataset& GammaSplits::get(Split split) const {
    switch (split) {
        case Split::Train: return train;
        case Split::Early: return early;
        case Split::Val: return val;
        case Split::Test: return test;
    }
    throw InvalidArgument("unknown split");
}

BagDataset& GammaSplits::get(Split split) {
    return const_cast<BagDataset&>(static_cast<const GammaSplits&>(*this).get(split));
}

std::uint64_t split_seed(std::uint64_t seed, Split split) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(split) + 1u, 0x9a3b1c5du};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<Index> bag_sizes(const GammaConfig& config, std::size_t n, std::uint64_t seed) {
    if (const auto* f = std::get_if<FixedBagSize>(&config.bag_size)) return std::vector<Index>(n, f->n);
    const double s5 = std::get<MixedBagSizes>(config.bag_size).s5;
    const std::array<Index, 4> sizes{5, 20, 100, 1000};
    const std::array<double, 4> share{s5 / 100.0, 0.25, 0.25, (50.0 - s5) / 100.0};
    // largest-remainder rounding so the counts sum to n
    std::array<std::size_t, 4> counts{};
    std::array<double, 4> rem{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 4; ++k) {
        const double exact = share[k] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[k] = exact - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    while (assigned < n) {
        const auto k = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
        ++counts[k];
        rem[k] = -1.0;
        ++assigned;
    }
    std::vector<Index> out;
    out.reserve(n);
    for (std::size_t k = 0; k < 4; ++k) out.insert(out.end(), counts[k], sizes[k]);
    std::mt19937_64 rng(seed);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

BagDataset gamma_generate_split(const GammaConfig& config, Split split) {
    config.validate();
    const std::uint64_t seed = split_seed(config.seed, split);
    const std::size_t n = config.count(split);
    const std::vector<Index> sizes = bag_sizes(config, n, seed ^ 0x5bd1e995ULL);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> label(config.label_lo, config.label_hi);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double theta = config.convention == GammaConvention::Rate ? 2.0 : 0.5;

    BagDataset data;
    data.bags.resize(n);
    const std::string prefix = to_string(split) + "-";
    for (std::size_t i = 0; i < n; ++i) {
        Bag& bag = data.bags[i];
        bag.id = prefix + std::to_string(i);
        const double y = label(rng);
        bag.label = y;
        std::gamma_distribution<double> gamma(y / 2.0, theta);
        bag.points.resize(sizes[i], config.dim);
        for (Index r = 0; r < sizes[i]; ++r) {
            for (Index c = 0; c < config.dim; ++c) {
                double v = gamma(rng) / y;
                if (config.noise_sd > 0.0) v += config.noise_sd * noise(rng);
                bag.points(r, c) = v;
            }
        }
    }
    return data;
}

GammaSplits gamma_generate(const GammaConfig& config) {
    GammaSplits out;
    for (Split s : kAllSplits) out.get(s) = gamma_generate_split(config, s);
    return out;
}

}  // namespace bagreg
