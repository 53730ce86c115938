#include <gtest/gtest.h>

#include <string>

#include "qgen/hash.hpp"
#include "qgen/random.hpp"
#include "qgen/text.hpp"

namespace {

using namespace qgen::text;

TEST(WordCount, Examples) {
  EXPECT_EQ(word_count(""), 0);
  EXPECT_EQ(word_count("a b  c"), 3);
  EXPECT_EQ(word_count("  leading\tand\ntrailing  "), 3);
}

TEST(WordCountProperty, AdditiveOverConcatenation) {
  qgen::Rng rng(3);
  const std::string alphabet = "ab  \t\nc.";
  auto gen = [&] {
    std::string s;
    const auto len = 1 + rng.below(20);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    return s;
  };
  for (int t = 0; t < 500; ++t) {
    const std::string a = gen();
    const std::string b = gen();
    EXPECT_EQ(word_count(a + " " + b), word_count(a) + word_count(b)) << a << "|" << b;
  }
}

TEST(Normalize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(normalize("Chest-Pain,  and STOMACH pain!"), "chest pain and stomach pain");
  EXPECT_EQ(tokens("I'm ok"), (std::vector<std::string>{"i", "m", "ok"}));
}

TEST(Split, KeepsEmptyFields) {
  EXPECT_EQ(split("a\t\tb", '\t'), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(split("", '\t'), (std::vector<std::string>{""}));
  EXPECT_EQ(join({"a", "b", "c"}, ", "), "a, b, c");
}

TEST(Misc, UrlsTrimAndEscape) {
  EXPECT_TRUE(contains_url("see https://example.com"));
  EXPECT_FALSE(contains_url("example.com"));
  EXPECT_EQ(trim("  x y \n"), "x y");
  EXPECT_EQ(tsv_escape("a\tb\nc"), "a b c");
}

TEST(Hash, KnownDigest) {
  EXPECT_EQ(qgen::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Rng, PortableStream) {
  // mt19937_64 output is fixed by the standard; 10000th draw of the default seed.
  std::mt19937_64 ref;
  ref.discard(9999);
  EXPECT_EQ(ref(), 9981545732273789042ULL);
  qgen::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.below(7), b.below(7));
  auto s = qgen::Rng(5).sample(10, 4);
  EXPECT_EQ(s.size(), 4u);
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::unique(s.begin(), s.end()), s.end());
}

}  // namespace
