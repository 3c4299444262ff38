#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "acsr/detail/text.hpp"
#include "acsr/domain.hpp"
#include "test_support.hpp"

using namespace acsr;
using testing_support::table;
using testing_support::vocab;

namespace {

nlohmann::json table_json() { return nlohmann::json::parse(detail::read_file(testing_support::data_dir() / "coding_table.json")); }

}  // namespace

TEST(Vocabulary, BundledFileHas44TokensPlusBlank) {
  const auto& v = vocab();
  EXPECT_EQ(v.size(), 45u);
  EXPECT_EQ(v.tokens().size(), 44u);
  EXPECT_EQ(v.symbol(Vocabulary::kBlank), kBlankSymbol);
  std::size_t vowels = 0, consonants = 0, symbols = 0;
  for (const auto& p : v.tokens()) {
    vowels += p.kind == PhonemeKind::vowel;
    consonants += p.kind == PhonemeKind::consonant;
    symbols += p.kind == PhonemeKind::symbol;
  }
  EXPECT_EQ(vowels + consonants, 40u);
  EXPECT_EQ(consonants, 24u);
  EXPECT_EQ(symbols, 4u);
}

TEST(Vocabulary, IndexSymbolRoundTrip) {
  const auto& v = vocab();
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_EQ(v.index(v.symbol(i)), i);
  EXPECT_THROW(v.index("zz"), ValidationError);
  EXPECT_FALSE(v.find("<blank>").has_value());
}

TEST(Vocabulary, WriteParseRoundTrip) {
  std::stringstream s;
  vocab().write(s);
  const auto again = Vocabulary::parse(s);
  EXPECT_EQ(again.tokens(), vocab().tokens());
}

TEST(Vocabulary, RejectsDuplicatesAndWrongCounts) {
  auto tokens = vocab().tokens();
  auto dup = tokens;
  dup[1].symbol = dup[0].symbol;
  EXPECT_THROW(Vocabulary{dup}, ValidationError);
  auto short_list = tokens;
  short_list.pop_back();
  EXPECT_THROW(Vocabulary{short_list}, ValidationError);
  std::istringstream bad("a\tvowel\tx\n");
  EXPECT_THROW(Vocabulary::parse(bad), ParseError);
  std::istringstream bad_kind("a\tnoun\n");
  EXPECT_THROW(Vocabulary::parse(bad_kind), ParseError);
}

TEST(HandPosition, IdNameBijection) {
  for (int id = 1; id <= 5; ++id) {
    const auto p = HandPosition::from_id(id);
    EXPECT_EQ(HandPosition::from_name(p.name()), p);
  }
  EXPECT_EQ(HandPosition::from_id(1).name(), "mouth");
  EXPECT_EQ(HandPosition::from_id(5).name(), "cheek");
  EXPECT_THROW(HandPosition::from_id(0), ValidationError);
  EXPECT_THROW(HandPosition::from_id(6), ValidationError);
  EXPECT_THROW(HandShape::from_id(9), ValidationError);
  EXPECT_THROW(HandPosition::from_name("nose"), ValidationError);
}

TEST(HandCode, SlotRoundTrip) {
  std::set<std::size_t> slots;
  for (int p = 1; p <= 5; ++p) {
    for (int s = 1; s <= 8; ++s) {
      const HandCode c{HandPosition{p}, HandShape{s}};
      EXPECT_EQ(HandCode::from_slot(c.slot()), c);
      slots.insert(c.slot());
    }
  }
  EXPECT_EQ(slots.size(), 40u);
}

TEST(CodingTable, BundledTableIsValid) {
  const auto& t = table();
  std::size_t vowels = 0, consonants = 0;
  for (int p = 1; p <= 5; ++p) vowels += t.vowels(HandPosition{p}).size();
  for (int s = 1; s <= 8; ++s) {
    consonants += t.consonants(HandShape{s}).size();
    EXPECT_FALSE(t.finger_spec(HandShape{s}).empty());
  }
  EXPECT_EQ(vowels, 16u);
  EXPECT_EQ(consonants, 24u);
}

TEST(CodingTable, ConstraintsFromTheLiterature) {
  const auto& t = table();
  const auto& v = vocab();
  // 'a' and 'er' share a position; 'r' and 's' share a shape.
  EXPECT_EQ(t.position_of(v.index("a")), t.position_of(v.index("er")));
  EXPECT_EQ(t.shape_of(v.index("r")), t.shape_of(v.index("s")));
  EXPECT_NE(t.shape_of(v.index("b")), t.shape_of(v.index("m")));
  EXPECT_EQ(t.finger_spec(HandShape{3}), "Middle, ring, and pinky fingers are straight. Thumb and index fingers are bent.");
  EXPECT_EQ(t.finger_spec(HandShape{4}), "Index, middle, ring and pinky fingers are straight. Thumb is bent.");
}

TEST(CodingTable, PhonemesForIsDisjointUnion) {
  const auto& t = table();
  std::set<std::size_t> covered;
  for (std::size_t slot = 0; slot < HandCode::kCombinations; ++slot) {
    const auto code = HandCode::from_slot(slot);
    const auto set = t.phonemes_for(code);
    EXPECT_EQ(set.size(), t.vowels(code.position).size() + t.consonants(code.shape).size());
    EXPECT_TRUE(std::is_sorted(set.begin(), set.end()));
    for (auto idx : set) {
      EXPECT_NE(vocab().token(idx).kind, PhonemeKind::symbol);
      covered.insert(idx);
    }
  }
  EXPECT_EQ(covered.size(), 40u);
}

TEST(CodingTable, SamePositionDifferentShapesShareExactlyTheVowels) {
  const auto& t = table();
  const auto a = t.phonemes_for({HandPosition{3}, HandShape{1}});
  const auto b = t.phonemes_for({HandPosition{3}, HandShape{6}});
  std::vector<std::size_t> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  EXPECT_EQ(common, t.vowels(HandPosition{3}));
}

TEST(CodingTable, ReverseLookup) {
  const auto& t = table();
  for (int p = 1; p <= 5; ++p) {
    for (auto idx : t.vowels(HandPosition{p})) EXPECT_EQ(t.position_of(idx), HandPosition{p});
  }
  for (int s = 1; s <= 8; ++s) {
    for (auto idx : t.consonants(HandShape{s})) EXPECT_EQ(t.shape_of(idx), HandShape{s});
  }
  EXPECT_FALSE(t.position_of(vocab().index("b")).has_value());
  EXPECT_FALSE(t.shape_of(vocab().word_boundary()).has_value());
}

TEST(CodingTable, ConsonantUnderTwoShapesIsRejected) {
  auto doc = table_json();
  doc["shapes"][1]["consonants"].push_back(doc["shapes"][0]["consonants"][0]);
  try {
    CodingTable::parse(doc, vocab());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("more than one shape"), std::string::npos);
  }
}

TEST(CodingTable, MissingPositionIsRejected) {
  auto doc = table_json();
  doc["positions"].erase(2);
  try {
    CodingTable::parse(doc, vocab());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("throat"), std::string::npos);
  }
}

TEST(CodingTable, OtherViolations) {
  auto unknown = table_json();
  unknown["positions"][0]["vowels"].push_back("xyz");
  EXPECT_THROW(CodingTable::parse(unknown, vocab()), ValidationError);

  auto consonant_as_vowel = table_json();
  consonant_as_vowel["positions"][0]["vowels"].push_back("b");
  EXPECT_THROW(CodingTable::parse(consonant_as_vowel, vocab()), ValidationError);

  auto missing_vowel = table_json();
  missing_vowel["positions"][4]["vowels"].erase(0);
  EXPECT_THROW(CodingTable::parse(missing_vowel, vocab()), ValidationError);

  auto wrong_name = table_json();
  wrong_name["positions"][0]["name"] = "chin";
  EXPECT_THROW(CodingTable::parse(wrong_name, vocab()), ValidationError);

  auto empty_spec = table_json();
  empty_spec["shapes"][0]["finger_spec"] = "";
  EXPECT_THROW(CodingTable::parse(empty_spec, vocab()), ValidationError);

  EXPECT_THROW(CodingTable::parse_text("{not json", vocab()), ParseError);
  EXPECT_THROW(CodingTable::parse_text("{\"positions\": 3, \"shapes\": []}", vocab()), ParseError);
  EXPECT_THROW(CodingTable::load("/nonexistent/table.json", vocab()), IoError);
}
