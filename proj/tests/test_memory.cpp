// Memory bank: edit algebra, cosine search against a brute-force
// oracle, bounded views, JSONL persistence.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "memcycle/memory.hpp"

using namespace memcycle;

namespace {

MemoryEntry make_entry(const std::string& text,
                       std::vector<double> embedding = {}) {
    MemoryEntry e;
    e.text = text;
    e.timestamp = "1:56 pm on 8 May, 2023";
    e.session_id = "s1";
    e.speaker = "Melanie";
    e.embedding = std::move(embedding);
    return e;
}

std::string add_text_entry(MemoryBank& bank, const std::string& text,
                           std::vector<double> embedding = {}) {
    auto id = bank.apply_edit(EditAction::add(text, "1:56 pm on 8 May, 2023",
                                              "s1", "Melanie"));
    if (!embedding.empty()) bank.set_embedding(*id, std::move(embedding));
    return *id;
}

// Independent search oracle: recompute every cosine from scratch and do
// a full stable ordering with the same tie rule. Deliberately shares no
// code with MemoryBank::search_top_k.
std::vector<std::pair<std::string, double>> brute_force_search(
    const MemoryBank& bank, const std::vector<double>& query, std::size_t k) {
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& e : bank.entries()) {
        double dot = 0.0;
        double qq = 0.0;
        double ee = 0.0;
        for (std::size_t i = 0; i < query.size(); ++i) {
            qq += query[i] * query[i];
        }
        if (e.embedding.empty()) {
            scored.emplace_back(e.id, 0.0);
            continue;
        }
        for (std::size_t i = 0; i < e.embedding.size(); ++i) {
            dot += e.embedding[i] * query[i];
            ee += e.embedding[i] * e.embedding[i];
        }
        double denom = std::sqrt(qq) * std::sqrt(ee);
        scored.emplace_back(e.id, denom == 0.0 ? 0.0 : dot / denom);
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
              });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<double> unit_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
        x = normal(rng);
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) x /= norm;
    return v;
}

}  // namespace

TEST(EditAlgebra, NoneIsIdentity) {
    MemoryBank bank;
    add_text_entry(bank, "Melanie plays the clarinet");
    MemoryBank before = bank;
    auto touched = bank.apply_edit(EditAction::none());
    EXPECT_FALSE(touched.has_value());
    EXPECT_EQ(bank, before);
}

TEST(EditAlgebra, AddGrowsByOne) {
    MemoryBank bank;
    EXPECT_EQ(bank.size(), 0u);
    add_text_entry(bank, "Melanie plays the clarinet");
    EXPECT_EQ(bank.size(), 1u);
    EXPECT_EQ(bank.entries()[0].text, "Melanie plays the clarinet");
    EXPECT_EQ(bank.entries()[0].speaker, "Melanie");
}

TEST(EditAlgebra, DeleteMissingIdIsUnknownTarget) {
    MemoryBank bank;
    add_text_entry(bank, "something");
    EXPECT_THROW(bank.apply_edit(EditAction::remove("x")), UnknownTarget);
    EXPECT_THROW(bank.apply_edit(EditAction::update("x", "t")), UnknownTarget);
}

TEST(EditAlgebra, UpdateKeepsIdAndTimestamp) {
    MemoryBank bank;
    std::string id = add_text_entry(bank, "Melanie plays the clarinet");
    std::string other = add_text_entry(bank, "Caroline went for a walk");
    MemoryEntry other_before = bank.get(other);
    bank.apply_edit(EditAction::update(id, "Melanie plays the violin"));
    const MemoryEntry& updated = bank.get(id);
    EXPECT_EQ(updated.id, id);
    EXPECT_EQ(updated.text, "Melanie plays the violin");
    EXPECT_EQ(updated.timestamp, "1:56 pm on 8 May, 2023");
    EXPECT_EQ(bank.get(other), other_before);
    EXPECT_EQ(bank.size(), 2u);
}

TEST(EditAlgebra, MalformedActionsRejected) {
    MemoryBank bank;
    EditAction add_with_target =
        EditAction::add("text", "ts", "s1", "Melanie");
    add_with_target.target_id = "m000000";
    EXPECT_THROW(bank.apply_edit(add_with_target), MalformedAction);

    EditAction update_without_text;
    update_without_text.kind = EditKind::UPDATE;
    update_without_text.target_id = "m000000";
    EXPECT_THROW(bank.apply_edit(update_without_text), MalformedAction);

    EditAction none_with_text = EditAction::none();
    none_with_text.new_text = "junk";
    EXPECT_THROW(bank.apply_edit(none_with_text), MalformedAction);
}

TEST(EditAlgebra, IdsNeverReusedAfterDelete) {
    MemoryBank bank;
    std::string a = add_text_entry(bank, "a");
    std::string b = add_text_entry(bank, "b");
    bank.apply_edit(EditAction::remove(b));
    std::string c = add_text_entry(bank, "c");
    EXPECT_NE(c, b);
    EXPECT_LT(a, b);
    EXPECT_LT(b, c);
}

TEST(Search, EmptyBankReturnsEmpty) {
    MemoryBank bank;
    EXPECT_TRUE(bank.search_top_k({1.0, 0.0}, 5).empty());
}

TEST(Search, HandComputedCosines) {
    MemoryBank bank;
    std::string e1 = add_text_entry(bank, "east", {1.0, 0.0});
    std::string e2 = add_text_entry(bank, "north", {0.0, 1.0});
    std::string e3 = add_text_entry(bank, "northeast", {0.7071, 0.7071});
    auto hits = bank.search_top_k({1.0, 0.0}, 2);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].entry->id, e1);
    EXPECT_NEAR(hits[0].score, 1.0, 1e-12);
    EXPECT_EQ(hits[1].entry->id, e3);
    EXPECT_NEAR(hits[1].score, 0.7071, 1e-4);
    (void)e2;
}

TEST(Search, KLargerThanBankClamps) {
    MemoryBank bank;
    add_text_entry(bank, "a", {1.0, 0.0});
    add_text_entry(bank, "b", {0.0, 1.0});
    add_text_entry(bank, "c", {0.7071, 0.7071});
    EXPECT_EQ(bank.search_top_k({1.0, 0.0}, 100).size(), 3u);
}

TEST(Search, ZeroVectorQueryScoresZero) {
    MemoryBank bank;
    add_text_entry(bank, "a", {1.0, 0.0});
    auto hits = bank.search_top_k({0.0, 0.0}, 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].score, 0.0);
}

TEST(Search, DimensionMismatchThrows) {
    MemoryBank bank;
    add_text_entry(bank, "a", {1.0, 0.0});
    EXPECT_THROW(bank.search_top_k({1.0, 0.0, 0.0}, 1), DimensionMismatch);
}

TEST(Search, TiesBreakByAscendingId) {
    MemoryBank bank;
    std::string a = add_text_entry(bank, "a", {1.0, 0.0});
    std::string b = add_text_entry(bank, "b", {1.0, 0.0});
    auto hits = bank.search_top_k({1.0, 0.0}, 2);
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].entry->id, a);
    EXPECT_EQ(hits[1].entry->id, b);
}

TEST(Search, MatchesBruteForceOracleOnRandomBanks) {
    std::mt19937_64 rng(20240511);
    for (int trial = 0; trial < 60; ++trial) {
        std::uniform_int_distribution<std::size_t> dim_dist(1, 16);
        std::uniform_int_distribution<std::size_t> size_dist(0, 200);
        std::uniform_int_distribution<std::size_t> k_dist(1, 50);
        std::size_t dim = dim_dist(rng);
        std::size_t n = size_dist(rng);
        MemoryBank bank;
        for (std::size_t i = 0; i < n; ++i) {
            add_text_entry(bank, "entry " + std::to_string(i),
                           unit_vector(rng, dim));
        }
        std::vector<double> query = unit_vector(rng, dim);
        std::size_t k = k_dist(rng);
        auto got = bank.search_top_k(query, k);
        auto expected = brute_force_search(bank, query, k);
        ASSERT_EQ(got.size(), expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].entry->id, expected[i].first);
            EXPECT_EQ(got[i].score, expected[i].second);
        }
    }
}

TEST(Search, ResultsSortedWithIdTieRule) {
    std::mt19937_64 rng(7);
    MemoryBank bank;
    for (int i = 0; i < 50; ++i) {
        add_text_entry(bank, "e" + std::to_string(i), unit_vector(rng, 4));
    }
    auto hits = bank.search_top_k(unit_vector(rng, 4), 50);
    for (std::size_t i = 1; i < hits.size(); ++i) {
        EXPECT_GE(hits[i - 1].score, hits[i].score);
        if (hits[i - 1].score == hits[i].score) {
            EXPECT_LT(hits[i - 1].entry->id, hits[i].entry->id);
        }
    }
}

TEST(BoundedViewTest, RecentIsSuffix) {
    MemoryBank bank;
    add_text_entry(bank, "a");
    std::string b = add_text_entry(bank, "b");
    std::string c = add_text_entry(bank, "c");
    BoundedView view = bank.bounded_view(std::nullopt, ViewPolicy::recent, 2);
    ASSERT_EQ(view.entries.size(), 2u);
    EXPECT_EQ(view.entries[0].id, b);
    EXPECT_EQ(view.entries[1].id, c);
}

TEST(BoundedViewTest, SemanticUsesSearch) {
    MemoryBank bank;
    std::string e1 = add_text_entry(bank, "east", {1.0, 0.0});
    add_text_entry(bank, "north", {0.0, 1.0});
    add_text_entry(bank, "northeast", {0.7071, 0.7071});
    BoundedView view = bank.bounded_view(std::vector<double>{1.0, 0.0},
                                         ViewPolicy::semantic, 1);
    ASSERT_EQ(view.entries.size(), 1u);
    EXPECT_EQ(view.entries[0].id, e1);
}

TEST(BoundedViewTest, SemanticWithoutAnchorThrows) {
    MemoryBank bank;
    EXPECT_THROW(bank.bounded_view(std::nullopt, ViewPolicy::semantic, 1),
                 MissingAnchor);
    EXPECT_THROW(bank.bounded_view(std::nullopt, ViewPolicy::hybrid, 2),
                 MissingAnchor);
}

TEST(BoundedViewTest, HybridDeduplicates) {
    MemoryBank bank;
    add_text_entry(bank, "a", {1.0, 0.0});
    add_text_entry(bank, "b", {0.9, std::sqrt(1.0 - 0.81)});
    BoundedView view = bank.bounded_view(std::vector<double>{1.0, 0.0},
                                         ViewPolicy::hybrid, 4);
    std::set<std::string> ids;
    for (const auto& e : view.entries) {
        EXPECT_TRUE(ids.insert(e.id).second) << "duplicate id " << e.id;
    }
    EXPECT_LE(view.entries.size(), 4u);
    EXPECT_EQ(view.entries.size(), 2u);
}

TEST(BoundedViewTest, HybridRecentFirst) {
    MemoryBank bank;
    std::string a = add_text_entry(bank, "a", {1.0, 0.0});
    std::string b = add_text_entry(bank, "b", {0.0, 1.0});
    std::string c = add_text_entry(bank, "c", {0.0, 1.0});
    // limit 2: 1 recent (c) + 1 semantic (a for anchor (1,0))
    BoundedView view = bank.bounded_view(std::vector<double>{1.0, 0.0},
                                         ViewPolicy::hybrid, 2);
    ASSERT_EQ(view.entries.size(), 2u);
    EXPECT_EQ(view.entries[0].id, c);
    EXPECT_EQ(view.entries[1].id, a);
    (void)b;
}

TEST(Persistence, EmptyBankRoundTrips) {
    MemoryBank bank;
    std::string serialized = bank.serialize();
    std::istringstream in(serialized);
    MemoryBank loaded = MemoryBank::deserialize(in);
    EXPECT_EQ(loaded, bank);
}

TEST(Persistence, ThreeEntryRoundTripPreservesOrderAndCounter) {
    MemoryBank bank;
    add_text_entry(bank, "one", {1.0, 0.0});
    std::string b = add_text_entry(bank, "two", {0.0, 1.0});
    add_text_entry(bank, "three", {0.7071067811865476, 0.7071067811865476});
    bank.apply_edit(EditAction::remove(b));
    add_text_entry(bank, "four", {0.0, 1.0});

    std::string serialized = bank.serialize();
    std::istringstream in(serialized);
    MemoryBank loaded = MemoryBank::deserialize(in);
    EXPECT_EQ(loaded, bank);
    EXPECT_EQ(loaded.counter(), bank.counter());
    // serialization is bit-exact across a round trip
    EXPECT_EQ(loaded.serialize(), serialized);
}

TEST(Persistence, MissingIdIsSchemaViolationWithLine) {
    std::string file =
        "{\"format\":\"memcycle-bank\",\"version\":1,\"dimension\":2,"
        "\"counter\":1}\n"
        "{\"text\":\"x\",\"timestamp\":\"t\",\"session_id\":\"s\","
        "\"speaker\":\"p\",\"source\":\"construction\",\"embedding\":[1.0,0.0]}"
        "\n";
    std::istringstream in(file);
    try {
        MemoryBank::deserialize(in);
        FAIL() << "expected SchemaViolation";
    } catch (const SchemaViolation& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("id"), std::string::npos);
    }
}

TEST(Persistence, FileIoRoundTrip) {
    MemoryBank bank;
    add_text_entry(bank, "persisted entry", {0.6, 0.8});
    std::string path =
        (std::filesystem::temp_directory_path() / "memcycle_bank_test.jsonl")
            .string();
    save_bank(bank, path);
    MemoryBank loaded = load_bank(path);
    EXPECT_EQ(loaded, bank);
    std::filesystem::remove(path);
}

TEST(Persistence, LoadMissingFileIsIoFailure) {
    EXPECT_THROW(load_bank("/nonexistent/path/bank.jsonl"), IoFailure);
}

// Randomized edit sequences: NONE identity, size laws, UPDATE field
// preservation, and save/load round-trip at every step.
TEST(EditAlgebra, PropertySuiteOverRandomSequences) {
    std::mt19937_64 rng(987654321);
    std::uniform_int_distribution<int> op_dist(0, 3);
    for (int sequence = 0; sequence < 500; ++sequence) {
        MemoryBank bank;
        int steps = 1 + static_cast<int>(rng() % 12);
        for (int step = 0; step < steps; ++step) {
            std::size_t before = bank.size();
            int op = op_dist(rng);
            if (op == 0 || bank.empty()) {
                add_text_entry(bank, "fact " + std::to_string(rng() % 1000),
                               unit_vector(rng, 4));
                ASSERT_EQ(bank.size(), before + 1);
            } else if (op == 1) {
                const auto& target =
                    bank.entries()[rng() % bank.size()];
                std::string id = target.id;
                std::string old_timestamp = target.timestamp;
                bank.apply_edit(EditAction::update(id, "updated"));
                ASSERT_EQ(bank.size(), before);
                ASSERT_EQ(bank.get(id).timestamp, old_timestamp);
                ASSERT_EQ(bank.get(id).text, "updated");
            } else if (op == 2) {
                std::string id = bank.entries()[rng() % bank.size()].id;
                bank.apply_edit(EditAction::remove(id));
                ASSERT_EQ(bank.size(), before - 1);
                ASSERT_FALSE(bank.contains(id));
            } else {
                MemoryBank snapshot = bank;
                bank.apply_edit(EditAction::none());
                ASSERT_EQ(bank, snapshot);
            }
        }
        std::istringstream in(bank.serialize());
        ASSERT_EQ(MemoryBank::deserialize(in), bank);
    }
}
