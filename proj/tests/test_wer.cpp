#include <doctest.h>

#include "mmsr/wer.hpp"

using namespace mmsr;

TEST_CASE("word splitting") {
    CHECK(split_words("the cat sat") == std::vector<std::string>{"the", "cat", "sat"});
    CHECK(split_words("  two   spaces ") == std::vector<std::string>{"two", "spaces"});
    CHECK(split_words("").empty());
}

TEST_CASE("worked examples") {
    CHECK(wer("the cat sat", "the cat sat") == 0.0);
    CHECK(wer("the cat sat", "the sat") == doctest::Approx(100.0 / 3.0));
    CHECK(wer("a b", "") == 100.0);
    CHECK(wer("", "") == 0.0);
    // empty reference with nonempty hypothesis: insertions over max(1, 0)
    CHECK(wer("", "a b") == 200.0);
}

TEST_CASE("substitutions, insertions, deletions") {
    CHECK(wer("a b c", "a x c") == doctest::Approx(100.0 / 3.0));  // 1 sub
    CHECK(wer("a b c", "a b c d") == doctest::Approx(100.0 / 3.0));  // 1 ins
    CHECK(wer("a b c d", "b c d") == doctest::Approx(25.0));  // 1 del
    CHECK(wer("x y", "y x") == doctest::Approx(100.0));  // 2 subs beat swap
}

TEST_CASE("symmetric bounds") {
    // WER is bounded by 100% when the hypothesis is not longer than the ref
    CHECK(wer("one two three four", "five") <= 100.0);
    CHECK(wer("one", "one two three") == doctest::Approx(200.0));
}
