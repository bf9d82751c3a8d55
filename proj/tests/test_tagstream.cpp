#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <stdexcept>
#include <vector>

#include "qtwtt/rng.hpp"
#include "qtwtt/tagstream.hpp"

using namespace qtwtt;

TEST_CASE("channel labels and standard indices") {
    CHECK(Channel::d1().label() == "D1");
    CHECK(Channel::d4().label() == "D4");
    CHECK(Channel::d1().standard_index() == 0);
    CHECK(Channel::d4().standard_index() == 3);
    CHECK(Channel("aux").standard_index() == std::nullopt);
    CHECK(Channel("D5").standard_index() == std::nullopt);
    for (int i = 0; i < 4; ++i)
        CHECK(Channel::from_standard_index(i).standard_index() == i);
    CHECK_THROWS_AS(Channel(""), std::invalid_argument);
    CHECK_THROWS_AS(Channel::from_standard_index(4), std::invalid_argument);
    CHECK(Channel("D2") == Channel::d2());
    CHECK(Channel("D2") != Channel::d3());
}

TEST_CASE("span is half open") {
    const Span s{10, 20};
    CHECK(s.length_ps() == 10);
    CHECK(s.contains(10));
    CHECK(s.contains(19));
    CHECK_FALSE(s.contains(20));
    CHECK_FALSE(s.contains(9));
    CHECK(s.length_s() == doctest::Approx(1e-11));
}

TEST_CASE("stream construction validates order and span") {
    CHECK_NOTHROW(TimeTagStream(Channel::d1(), {1, 2, 3}, Span{0, 10}));
    CHECK_NOTHROW(TimeTagStream(Channel::d1(), {}, Span{0, 10}));
    CHECK_NOTHROW(TimeTagStream(Channel::d1(), {5, 5, 5}, Span{0, 10}));
    CHECK_THROWS_AS(TimeTagStream(Channel::d1(), {3, 2}, Span{0, 10}),
                    std::invalid_argument);
    CHECK_THROWS_AS(TimeTagStream(Channel::d1(), {0, 10}, Span{0, 10}),
                    std::invalid_argument);  // 10 is outside [0, 10)
    CHECK_THROWS_AS(TimeTagStream(Channel::d1(), {-1}, Span{0, 10}),
                    std::invalid_argument);
    CHECK_THROWS_AS(TimeTagStream(Channel::d1(), {}, Span{10, 0}),
                    std::invalid_argument);
}

TEST_CASE("from_unsorted sorts before validating") {
    const auto s =
        TimeTagStream::from_unsorted(Channel::d2(), {5, 1, 3}, Span{0, 10});
    CHECK(s.tags() == std::vector<std::int64_t>{1, 3, 5});
    CHECK(s.channel() == Channel::d2());
}

TEST_CASE("rate is count over span length") {
    const TimeTagStream s(Channel::d1(), {0, 1, 2, 3},
                          Span{0, 2'000'000'000'000});  // 2 s
    CHECK(s.rate_hz() == doctest::Approx(2.0));
}

TEST_CASE("slice keeps exactly the half-open window") {
    const TimeTagStream s(Channel::d1(), {0, 10, 20, 30, 40}, Span{0, 100});
    const auto w = slice_window(s, 10, 30);
    CHECK(w.tags() == std::vector<std::int64_t>{10, 20});
    CHECK(w.span().start_ps == 10);
    CHECK(w.span().end_ps == 30);
    CHECK(slice_window(s, 41, 90).empty());
    CHECK(slice_window(s, 200, 300).empty());  // disjoint window is fine
    CHECK_THROWS_AS(slice_window(s, 30, 10), std::invalid_argument);
}

TEST_CASE("windows tile without double counting") {
    Rng rng(7);
    std::vector<std::int64_t> tags;
    for (int i = 0; i < 500; ++i)
        tags.push_back(static_cast<std::int64_t>(rng.uniform01() * 1e6));
    auto s = TimeTagStream::from_unsorted(Channel::d3(), tags, Span{0, 1000000});
    std::size_t total = 0;
    for (std::int64_t t = 0; t < 1000000; t += 100000)
        total += slice_window(s, t, t + 100000).size();
    CHECK(total == s.size());
}

TEST_CASE("merge joins overlapping or touching spans only") {
    const TimeTagStream a(Channel::d1(), {1, 5}, Span{0, 10});
    const TimeTagStream b(Channel::d1(), {12, 15}, Span{10, 20});
    const auto m = merge(a, b);
    CHECK(m.tags() == std::vector<std::int64_t>{1, 5, 12, 15});
    CHECK(m.span().start_ps == 0);
    CHECK(m.span().end_ps == 20);

    const TimeTagStream c(Channel::d1(), {30}, Span{25, 40});
    CHECK_THROWS_AS(merge(a, c), std::invalid_argument);
    const TimeTagStream d(Channel::d2(), {3}, Span{0, 10});
    CHECK_THROWS_AS(merge(a, d), std::invalid_argument);
}

TEST_CASE("merge interleaves out-of-order tag blocks") {
    const TimeTagStream a(Channel::d1(), {1, 8, 9}, Span{0, 10});
    const TimeTagStream b(Channel::d1(), {2, 3, 7}, Span{0, 15});
    const auto m = merge(a, b);
    CHECK(m.tags() == std::vector<std::int64_t>{1, 2, 3, 7, 8, 9});
}

TEST_CASE("with_channel relabels only") {
    const TimeTagStream a(Channel::d1(), {1, 2}, Span{0, 10});
    const auto b = with_channel(a, Channel("mon"));
    CHECK(b.channel().label() == "mon");
    CHECK(b.tags() == a.tags());
    CHECK(b.span().start_ps == a.span().start_ps);
}
