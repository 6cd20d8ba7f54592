#include "shapmine/shapley.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace shapmine;

std::vector<std::pair<FeatureId, double>> players_of(int k) {
    std::vector<std::pair<FeatureId, double>> out;
    const auto& catalog = feature_catalog();
    for (int i = 0; i < k; ++i) out.emplace_back(catalog[i].id, catalog[i].lo);
    return out;
}

CoalitionGame random_game(std::mt19937_64& rng, int k) {
    auto g = CoalitionGame::make("rnd", "m", "x", players_of(k));
    std::uniform_real_distribution<double> value(-10.0, 10.0);
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) g.set_value(mask, value(rng));
    return g;
}

TEST(ShapleyExact, NullPlayerExample) {
    auto g = CoalitionGame::make("g", "m", "x", players_of(2));
    g.set_value(0b01, 1.0);
    g.set_value(0b10, 0.0);
    g.set_value(0b11, 1.0);
    auto a = shapley_exact(g);
    EXPECT_DOUBLE_EQ(a.phi[0], 1.0);
    EXPECT_DOUBLE_EQ(a.phi[1], 0.0);
}

TEST(ShapleyExact, CardinalityGameIsSymmetric) {
    auto g = CoalitionGame::make("g", "m", "x", players_of(3));
    for (std::uint32_t mask = 1; mask < 8; ++mask)
        g.set_value(mask, static_cast<double>(std::popcount(mask)));
    auto a = shapley_exact(g);
    for (double phi : a.phi) EXPECT_NEAR(phi, 1.0, 1e-12);
}

TEST(ShapleyExact, HandBruteForcedThreePlayerGame) {
    auto g = CoalitionGame::make("g", "m", "x", players_of(3));
    g.set_value(0b001, 1);
    g.set_value(0b010, 2);
    g.set_value(0b100, 3);
    g.set_value(0b011, 4);
    g.set_value(0b101, 5);
    g.set_value(0b110, 6);
    g.set_value(0b111, 9);
    auto a = shapley_exact(g);
    EXPECT_NEAR(a.phi[0], 2.0, 1e-12);
    EXPECT_NEAR(a.phi[1], 3.0, 1e-12);
    EXPECT_NEAR(a.phi[2], 4.0, 1e-12);
}

TEST(PermutationOracle, MatchesExactOnExamples) {
    auto g = CoalitionGame::make("g", "m", "x", players_of(3));
    g.set_value(0b001, 1);
    g.set_value(0b010, 2);
    g.set_value(0b100, 3);
    g.set_value(0b011, 4);
    g.set_value(0b101, 5);
    g.set_value(0b110, 6);
    g.set_value(0b111, 9);
    auto exact = shapley_exact(g);
    auto oracle = shapley_permutation_oracle(g);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(exact.phi[i], oracle.phi[i], 1e-9);
}

TEST(PermutationOracle, SinglePlayer) {
    auto g = CoalitionGame::make("g", "m", "x", players_of(1));
    g.set_value(0b1, 7.5);
    auto a = shapley_permutation_oracle(g);
    EXPECT_DOUBLE_EQ(a.phi[0], 7.5);
}

TEST(PermutationOracle, MatchesExactOnRandomGames) {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 100; ++round) {
        int k = 2 + static_cast<int>(rng() % 4); // k in 2..5
        auto g = random_game(rng, k);
        auto exact = shapley_exact(g);
        auto oracle = shapley_permutation_oracle(g);
        for (int i = 0; i < k; ++i) EXPECT_NEAR(exact.phi[i], oracle.phi[i], 1e-9);
    }
}

TEST(PermutationOracle, MatchesExactAtTableBound) {
    std::mt19937_64 rng(88);
    auto g = random_game(rng, 8); // 8! permutations
    auto exact = shapley_exact(g);
    auto oracle = shapley_permutation_oracle(g);
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(exact.phi[i], oracle.phi[i], 1e-9);
}

TEST(Axioms, EfficiencyOnRandomGames) {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 100; ++round) {
        auto g = random_game(rng, 2 + static_cast<int>(rng() % 5));
        EXPECT_TRUE(verify_efficiency(g, shapley_exact(g), 1e-9));
    }
}

TEST(Axioms, SymmetryOnSymmetrizedGames) {
    std::mt19937_64 rng(8);
    for (int round = 0; round < 100; ++round) {
        int k = 3 + static_cast<int>(rng() % 3);
        auto g = random_game(rng, k);
        // make players 0 and 1 interchangeable
        for (std::uint32_t s = 0; s < (1u << k); ++s) {
            if ((s & 0b11) != 0) continue;
            double merged = (g.value(s | 1) + g.value(s | 2)) / 2.0;
            g.values[s | 1] = merged;
            g.values[s | 2] = merged;
        }
        auto a = shapley_exact(g);
        EXPECT_NEAR(a.phi[0], a.phi[1], 1e-9);
        EXPECT_TRUE(verify_symmetry(g, a, 1e-9));
    }
}

TEST(Axioms, AdditivityAndScaling) {
    std::mt19937_64 rng(9);
    for (int round = 0; round < 100; ++round) {
        int k = 2 + static_cast<int>(rng() % 4);
        auto v = random_game(rng, k);
        auto w = random_game(rng, k);
        auto sum = add_games(v, w);
        auto av = shapley_exact(v);
        auto aw = shapley_exact(w);
        auto as = shapley_exact(sum);
        for (int i = 0; i < k; ++i) EXPECT_NEAR(as.phi[i], av.phi[i] + aw.phi[i], 1e-9);

        double factor = 3.5;
        auto scaled = shapley_exact(scale_game(v, factor));
        for (int i = 0; i < k; ++i) EXPECT_NEAR(scaled.phi[i], factor * av.phi[i], 1e-9);
    }
}

TEST(Axioms, NullPlayerExactZero) {
    std::mt19937_64 rng(10);
    for (int round = 0; round < 100; ++round) {
        int k = 3 + static_cast<int>(rng() % 3);
        auto g = random_game(rng, k);
        // force player 0 to contribute nothing
        for (std::uint32_t s = 0; s < (1u << k); ++s)
            if ((s & 1u) == 0 && s != 0) g.values[s | 1u] = g.value(s);
        g.values[1] = 0.0; // v({0}) = v(empty)
        auto a = shapley_exact(g);
        EXPECT_EQ(a.phi[0], 0.0);
        EXPECT_TRUE(verify_null_player(g, a));
    }
}

TEST(Axioms, RankingInvariantUnderPositiveScaling) {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 50; ++round) {
        int k = 3 + static_cast<int>(rng() % 4);
        auto g = random_game(rng, k);
        auto base = shapley_exact(g);
        auto scaled = shapley_exact(scale_game(g, 17.25));
        auto order = [](const std::vector<double>& phi) {
            std::vector<int> idx(phi.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return phi[a] > phi[b]; });
            return idx;
        };
        EXPECT_EQ(order(base.phi), order(scaled.phi));
    }
}

TEST(Normalize, Shares) {
    bool degenerate = false;
    auto shares = normalize({2.0, 1.0, 1.0}, &degenerate);
    EXPECT_FALSE(degenerate);
    EXPECT_DOUBLE_EQ(shares[0], 0.5);
    EXPECT_DOUBLE_EQ(shares[1], 0.25);
    EXPECT_DOUBLE_EQ(shares[2], 0.25);

    auto zero = normalize({0.0, 0.0}, &degenerate);
    EXPECT_TRUE(degenerate);
    EXPECT_DOUBLE_EQ(zero[0], 0.0);
    EXPECT_DOUBLE_EQ(zero[1], 0.0);
}

TEST(Normalize, ShareConsistencyWithReportedExample) {
    // a phi of 3.4 that accounts for 22% of total impact implies
    // sum|phi| = 3.4 / 0.22
    double total = 3.4 / 0.22;
    auto shares = normalize({3.4, -(total - 3.4)});
    EXPECT_NEAR(shares[0], 0.22, 1e-12);
    EXPECT_NEAR(shares[0] + shares[1], 1.0, 1e-12);
}

TEST(Game, EmptyCoalitionPinnedAtZero) {
    auto g = CoalitionGame::make("g", "m", "x", players_of(2));
    EXPECT_DOUBLE_EQ(g.value(0), 0.0);
    EXPECT_THROW(g.set_value(0, 1.0), DomainError);
    EXPECT_FALSE(g.complete());
    EXPECT_THROW(shapley_exact(g), DomainError);
    EXPECT_THROW(shapley_permutation_oracle(g), DomainError);
}

MeasurementRow row(const std::map<FeatureId, double>& targets, const std::string& miner,
                   const std::string& metric, std::optional<double> value) {
    TargetConfiguration tc;
    tc.id = "id";
    tc.targets = targets;
    return MeasurementRow{tc, miner, metric, value};
}

TEST(AssembleGames, FullTripleCoverage) {
    std::vector<MeasurementRow> rows;
    std::map<FeatureId, double> a{{FeatureId::aq1, 1.0}};
    std::map<FeatureId, double> b{{FeatureId::nusa, 2.0}};
    std::map<FeatureId, double> c{{FeatureId::tlv, 3.0}};
    auto join = [](std::initializer_list<std::map<FeatureId, double>> maps) {
        std::map<FeatureId, double> out;
        for (const auto& m : maps) out.insert(m.begin(), m.end());
        return out;
    };
    std::vector<std::map<FeatureId, double>> coalitions = {
        a, b, c, join({a, b}), join({a, c}), join({b, c}), join({a, b, c})};
    int v = 0;
    for (const auto& miner : {"m1", "m2"})
        for (const auto& metric : {"fitness", "size"})
            for (const auto& coalition : coalitions)
                rows.push_back(row(coalition, miner, metric, 1.0 + (v++ % 7)));

    auto games = assemble_games(rows, 3);
    ASSERT_EQ(games.size(), 4u); // 1 value-triple x 2 miners x 2 metrics
    for (const auto& g : games) {
        EXPECT_TRUE(g.complete());
        EXPECT_EQ(g.player_count(), 3);
        int stored = 0;
        for (const auto& val : g.values) stored += val.has_value();
        EXPECT_EQ(stored, 8); // empty set + 7 coalitions
    }
}

TEST(AssembleGames, MissingPairMakesIncomplete) {
    std::map<FeatureId, double> a{{FeatureId::aq1, 1.0}};
    std::map<FeatureId, double> b{{FeatureId::nusa, 2.0}};
    std::map<FeatureId, double> ab{{FeatureId::aq1, 1.0}, {FeatureId::nusa, 2.0}};
    std::vector<MeasurementRow> rows = {
        row(a, "m", "fitness", 0.5),
        row(b, "m", "fitness", std::nullopt), // failed singleton
        row(ab, "m", "fitness", 0.9),
    };
    auto games = assemble_games(rows, 2);
    ASSERT_EQ(games.size(), 1u);
    EXPECT_FALSE(games[0].complete());
}

TEST(AssembleGames, PairsNeedTwoSingletonsAndPair) {
    // n=3 features, v=1 value, k_max=2 -> 3 pair games
    std::map<FeatureId, double> a{{FeatureId::aq1, 1.0}};
    std::map<FeatureId, double> b{{FeatureId::nusa, 2.0}};
    std::map<FeatureId, double> c{{FeatureId::tlv, 3.0}};
    auto merge = [](std::map<FeatureId, double> x, const std::map<FeatureId, double>& y) {
        x.insert(y.begin(), y.end());
        return x;
    };
    std::vector<MeasurementRow> rows = {
        row(a, "m", "fitness", 1),         row(b, "m", "fitness", 2),
        row(c, "m", "fitness", 3),         row(merge(a, b), "m", "fitness", 4),
        row(merge(a, c), "m", "fitness", 5), row(merge(b, c), "m", "fitness", 6),
    };
    auto games = assemble_games(rows, 2);
    ASSERT_EQ(games.size(), 3u);
    for (const auto& g : games) {
        EXPECT_TRUE(g.complete());
        EXPECT_EQ(g.player_count(), 2);
    }
}

TEST(AssembleGames, ConflictingDuplicatesRejected) {
    std::map<FeatureId, double> a{{FeatureId::aq1, 1.0}};
    std::vector<MeasurementRow> rows = {
        row(a, "m", "fitness", 0.5),
        row(a, "m", "fitness", 0.6),
    };
    EXPECT_THROW(assemble_games(rows, 1), DomainError);
    // identical duplicates are fine
    std::vector<MeasurementRow> dup = {row(a, "m", "fitness", 0.5), row(a, "m", "fitness", 0.5)};
    EXPECT_EQ(assemble_games(dup, 1).size(), 1u);
}

TEST(ShapleyCsv, RowShape) {
    auto g = CoalitionGame::make("game9", "m1", "fitness", players_of(2));
    g.set_value(1, 0.25);
    g.set_value(2, 0.5);
    g.set_value(3, 1.0);
    auto rows = shapley_csv_rows(shapley_exact(g));
    EXPECT_EQ(shapley_csv_header(), "game_id,miner,metric,feature,target_value,phi,phi_normalized,complete");
    EXPECT_NE(rows.find("game9,m1,fitness,aq1,"), std::string::npos);
    EXPECT_NE(rows.find("game9,m1,fitness,nusa,"), std::string::npos);
}

} // namespace
