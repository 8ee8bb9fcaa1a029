/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sensemesh/storage/window_store.hpp"
#include "sensemesh/wire/frame.hpp"

#include <deque>
#include <filesystem>
#include <fstream>
#include <random>

using namespace sensemesh;
namespace fs = std::filesystem;

namespace {

core::StreamElement element(const std::string& sensor, std::int64_t seq, std::int64_t ts = -1,
                            double value = -1.0) {
    core::StreamElement e;
    e.sensor = sensor;
    e.seq = seq;
    e.timestamp_ms = ts >= 0 ? ts : 1000 * seq;
    e.values = {core::Value{value >= 0.0 ? value : static_cast<double>(seq)}};
    return e;
}

std::vector<std::int64_t> seqs(const std::vector<core::StreamElement>& es) {
    std::vector<std::int64_t> out;
    for (const auto& e : es) out.push_back(e.seq);
    return out;
}

} // namespace

TEST_CASE("25 inserts into capacity 10 keep the newest 10") {
    storage::WindowStore store("s", 10);
    for (int i = 0; i < 25; ++i) {
        auto r = store.insert(element("s", i));
        REQUIRE(r.ok());
        if (i < 10) {
            CHECK_FALSE(r.value().evicted.has_value());
        } else {
            REQUIRE(r.value().evicted.has_value());
            CHECK(r.value().evicted->seq == i - 10);
        }
    }
    CHECK(store.count() == 10);
    CHECK(store.total_inserted() == 25);
    CHECK(seqs(store.get_since(-1)) ==
          std::vector<std::int64_t>{15, 16, 17, 18, 19, 20, 21, 22, 23, 24});
}

TEST_CASE("capacity one always holds only the newest element") {
    storage::WindowStore store("s", 1);
    auto first = store.insert(element("s", 0, 10, 1.0));
    REQUIRE(first.ok());
    CHECK_FALSE(first.value().evicted.has_value());
    auto second = store.insert(element("s", 1, 20, 2.0));
    REQUIRE(second.ok());
    REQUIRE(second.value().evicted.has_value());
    CHECK(second.value().evicted->seq == 0);
    REQUIRE(store.latest().has_value());
    CHECK(store.latest()->seq == 1);
}

TEST_CASE("inserts below capacity evict nothing") {
    storage::WindowStore store("s", 100);
    for (int i = 0; i < 40; ++i) {
        auto r = store.insert(element("s", i));
        REQUIRE(r.ok());
        CHECK_FALSE(r.value().evicted.has_value());
    }
    CHECK(store.count() == 40);
}

TEST_CASE("a sequence gap is rejected and the window stays intact") {
    storage::WindowStore store("s", 4);
    REQUIRE(store.insert(element("s", 0)).ok());
    auto gap = store.insert(element("s", 2));
    REQUIRE_FALSE(gap.ok());
    CHECK(gap.error().code == std::string(storage::code::kSeqGap));
    CHECK(store.count() == 1);
    CHECK(store.total_inserted() == 1);
}

TEST_CASE("query_latest returns newest first") {
    storage::WindowStore store("s", 16);
    SUBCASE("empty store gives an empty answer") {
        CHECK(store.query_latest(5).empty());
    }
    SUBCASE("n smaller than count trims from the old end") {
        for (int i = 0; i < 10; ++i) REQUIRE(store.insert(element("s", i)).ok());
        CHECK(seqs(store.query_latest(3)) == std::vector<std::int64_t>{9, 8, 7});
    }
    SUBCASE("n larger than count returns the whole window") {
        for (int i = 0; i < 4; ++i) REQUIRE(store.insert(element("s", i)).ok());
        CHECK(seqs(store.query_latest(99)) == std::vector<std::int64_t>{3, 2, 1, 0});
    }
}

TEST_CASE("query_range is inclusive and oldest first") {
    storage::WindowStore store("s", 32);
    // Elements at t = 0s, 1s, ..., 9s.
    for (int i = 0; i < 10; ++i) REQUIRE(store.insert(element("s", i, 1000 * i)).ok());

    SUBCASE("inverted range is an error") {
        auto r = store.query_range(5000, 1000);
        REQUIRE_FALSE(r.ok());
        CHECK(r.error().code == std::string(storage::code::kRangeInverted));
    }
    SUBCASE("range covering nothing") {
        auto r = store.query_range(100000, 200000);
        REQUIRE(r.ok());
        CHECK(r.value().empty());
    }
    SUBCASE("range covering everything") {
        auto r = store.query_range(0, 9000);
        REQUIRE(r.ok());
        CHECK(seqs(r.value()) == std::vector<std::int64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    }
    SUBCASE("range [t5, t7] picks exactly three elements") {
        auto r = store.query_range(5000, 7000);
        REQUIRE(r.ok());
        CHECK(seqs(r.value()) == std::vector<std::int64_t>{5, 6, 7});
    }
}

TEST_CASE("byte accounting tracks exactly the retained elements") {
    storage::WindowStore store("s", 5);
    CHECK(store.bytes_estimate() == 0);
    size_t expected = 0;
    std::deque<core::StreamElement> shadow;
    for (int i = 0; i < 12; ++i) {
        auto e = element("s", i, 1000 * i, 1.0 + i);
        expected += storage::element_wire_size(e);
        shadow.push_back(e);
        if (shadow.size() > 5) {
            expected -= storage::element_wire_size(shadow.front());
            shadow.pop_front();
        }
        REQUIRE(store.insert(e).ok());
        CHECK(store.bytes_estimate() == expected);
    }
    CHECK(store.bytes_estimate() > 0);
}

TEST_CASE("after saturation the footprint of a fixed-size stream is constant") {
    storage::WindowStore store("s", 8);
    std::vector<size_t> post_saturation;
    for (int i = 0; i < 40; ++i) {
        // Same payload each tick, only seq/ts differ within the same digit count.
        auto e = element("s", i, 100000 + i, 0.5);
        REQUIRE(store.insert(e).ok());
        if (i >= 8) post_saturation.push_back(store.bytes_estimate());
    }
    const auto [lo, hi] = std::minmax_element(post_saturation.begin(), post_saturation.end());
    // Bounded store: size varies by less than one element's wire size.
    CHECK(*hi - *lo < storage::element_wire_size(element("s", 39, 100039, 0.5)));
}

TEST_CASE("shrinking the window evicts immediately, growing keeps content") {
    storage::WindowStore store("s", 10);
    for (int i = 0; i < 10; ++i) REQUIRE(store.insert(element("s", i)).ok());
    store.set_capacity(4);
    CHECK(store.count() == 4);
    CHECK(seqs(store.get_since(-1)) == std::vector<std::int64_t>{6, 7, 8, 9});
    store.set_capacity(10);
    CHECK(store.count() == 4);
    REQUIRE(store.insert(element("s", 10)).ok());
    CHECK(store.count() == 5);
}

TEST_CASE("get_since returns only newer elements oldest first") {
    storage::WindowStore store("s", 8);
    for (int i = 0; i < 8; ++i) REQUIRE(store.insert(element("s", i)).ok());
    CHECK(seqs(store.get_since(4)) == std::vector<std::int64_t>{5, 6, 7});
    CHECK(store.get_since(7).empty());
    CHECK(store.get_since(100).empty());
}

TEST_CASE("spill log holds every inserted element as a stream line") {
    const auto path = fs::temp_directory_path() /
                      ("sensemesh_spill_" + std::to_string(std::random_device{}()) + ".log");
    {
        storage::WindowStore store("s", 2, path.string());
        for (int i = 0; i < 5; ++i) REQUIRE(store.insert(element("s", i)).ok());
        CHECK(store.count() == 2); // ring is bounded even though the log is not
    }
    std::ifstream in(path);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        auto frame = wire::decode_frame(line);
        REQUIRE(frame.ok());
        auto delivered = wire::frame_to_element(frame.value());
        REQUIRE(delivered.ok());
        CHECK(delivered.value().element.seq == n);
        ++n;
    }
    CHECK(n == 5);
    fs::remove(path);
}

TEST_CASE("store set sums footprints across sensors") {
    storage::StoreSet set;
    CHECK(set.total_bytes_estimate() == 0);
    auto a = std::make_shared<storage::WindowStore>("a", 4);
    auto b = std::make_shared<storage::WindowStore>("b", 4);
    set.add(a);
    set.add(b);
    REQUIRE(a->insert(element("a", 0)).ok());
    REQUIRE(b->insert(element("b", 0)).ok());
    CHECK(set.total_bytes_estimate() == a->bytes_estimate() + b->bytes_estimate());
    CHECK(set.sensors() == std::vector<std::string>{"a", "b"});
    CHECK(set.get("a") == a);
    CHECK(set.get("zz") == nullptr);
}

TEST_CASE("property: a million randomized inserts match the naive oracle") {
    std::mt19937_64 rng(0x5eed0006);
    std::uint64_t total_inserts = 0;
    int scenario = 0;
    while (total_inserts < 1000000) {
        ++scenario;
        const size_t capacity = 1 + rng() % 512;
        const size_t length = 1 + rng() % 8192;
        storage::WindowStore store("s", capacity);
        std::deque<core::StreamElement> oracle; // naive reference: plain list, trim front
        for (size_t i = 0; i < length; ++i) {
            auto e = element("s", static_cast<std::int64_t>(i),
                             static_cast<std::int64_t>(i) * 7 + static_cast<std::int64_t>(rng() % 5),
                             static_cast<double>(rng() % 1000) / 8.0);
            REQUIRE(store.insert(e).ok());
            oracle.push_back(e);
            if (oracle.size() > capacity) oracle.pop_front();
        }
        total_inserts += length;
        // Window content must equal the last min(n, capacity) inserts, in order.
        const auto got = store.get_since(-1);
        REQUIRE(got.size() == oracle.size());
        bool all_equal = true;
        for (size_t i = 0; i < got.size(); ++i) {
            if (!(got[i] == oracle[i])) {
                all_equal = false;
                break;
            }
        }
        CAPTURE(scenario);
        CAPTURE(capacity);
        CAPTURE(length);
        CHECK(all_equal);
        CHECK(store.count() <= capacity);
    }
    CHECK(total_inserts >= 1000000);
}
