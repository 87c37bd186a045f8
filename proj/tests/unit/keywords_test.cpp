#include "helpers.hpp"

#include "quest/errors.hpp"
#include "quest/keywords.hpp"

#include <gtest/gtest.h>

#include <map>
#include <sstream>

using namespace quest;

namespace {

std::map<std::string, double> as_map(const std::vector<KeywordCandidate>& cands)
{
    std::map<std::string, double> out;
    for (const auto& c : cands)
        out[c.phrase] = c.score;
    return out;
}

} // namespace

TEST(Rake, WorkedExample)
{
    const auto got = as_map(rake_extract("what is the best way to train long context models", english_stopwords()));
    const std::map<std::string, double> want = {{"best way", 4.0}, {"train long context models", 16.0}};
    EXPECT_EQ(got, want);
}

TEST(Rake, EmptyAndStopwordOnlyInputs)
{
    EXPECT_TRUE(rake_extract("", english_stopwords()).empty());
    EXPECT_TRUE(rake_extract("the of and", english_stopwords()).empty());
}

TEST(Rake, PunctuationSplitsPhrasesAndCaseFolds)
{
    const auto got = as_map(rake_extract("Solar panels, Battery storage? solar panels!", english_stopwords()));
    const std::map<std::string, double> want = {{"solar panels", 4.0}, {"battery storage", 4.0}};
    EXPECT_EQ(got, want);
}

TEST(Rake, DegreeAndFrequencyAcrossRepeats)
{
    // "grid": freq 2, degree 1 + 3 = 4 -> 2.0; "smart": 3/1; "meter": 3/1.
    const auto got = as_map(rake_extract("grid and smart grid meter", english_stopwords()));
    EXPECT_DOUBLE_EQ(got.at("grid"), 2.0);
    EXPECT_DOUBLE_EQ(got.at("smart grid meter"), 3.0 + 2.0 + 3.0);
}

TEST(Rake, SortedByScoreThenPhrase)
{
    const auto got = rake_extract("zeta beta, alpha gamma, delta", english_stopwords());
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0].phrase, "alpha gamma");
    EXPECT_EQ(got[1].phrase, "zeta beta");
    EXPECT_EQ(got[2].phrase, "delta");
}

TEST(Rake, PhraseCapDropsLongRuns)
{
    RakeOptions options;
    options.max_phrase_words = 2;
    const auto got = as_map(rake_extract("the best way to train long context models", english_stopwords(), options));
    EXPECT_EQ(got.size(), 1u);
    EXPECT_TRUE(got.count("best way"));
}

TEST(Filter, PublishedStopKeywordIsDropped)
{
    const std::vector<KeywordCandidate> cands = {{"best way", 4.0}};
    EXPECT_TRUE(filter_keywords(cands, default_stop_keywords()).empty());
}

TEST(Filter, ShortPhraseIsDropped)
{
    const std::vector<KeywordCandidate> cands = {{"ai", 4.0}, {"abc", 9.0}, {"café", 4.0}};
    const auto kept = filter_keywords(cands, default_stop_keywords());
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].phrase, "café");
}

TEST(Filter, ScoreThreshold)
{
    const std::vector<KeywordCandidate> cands = {{"solar panel efficiency", 9.0}, {"cost", 2.5}, {"grid", 3.0}};
    const auto kept = as_map(filter_keywords(cands, default_stop_keywords()));
    const std::map<std::string, double> want = {{"solar panel efficiency", 9.0}, {"grid", 3.0}};
    EXPECT_EQ(kept, want);
}

TEST(StopKeywords, PublishedListIsComplete)
{
    EXPECT_EQ(published_stop_keywords().size(), 21u);
    const auto all = default_stop_keywords();
    for (auto p : published_stop_keywords())
        EXPECT_TRUE(all.count(std::string(p))) << p;
    for (auto p : extended_stop_keywords())
        EXPECT_TRUE(all.count(std::string(p))) << p;
    EXPECT_EQ(english_stopwords().size(), 179u);
}

TEST(StopKeywords, FileLoaderNormalizesAndSkipsComments)
{
    qt::TempDir dir;
    qt::write_file(dir / "stop.txt", "# comment\nSolar  Power!\n\nfoo-bar\n");
    const auto set = load_phrase_file(dir / "stop.txt");
    EXPECT_EQ(set.size(), 2u);
    EXPECT_TRUE(set.count("solar power"));
    EXPECT_TRUE(set.count("foobar") || set.count("foo bar"));
    EXPECT_THROW(load_phrase_file(dir / "missing.txt"), ConfigError);
}

TEST(Normalize, LowercaseStripPunctuationCollapseSpaces)
{
    EXPECT_EQ(normalize_phrase("  Solar, Power! "), "solar power");
    EXPECT_EQ(normalize_phrase("Solar Power"), normalize_phrase("solar power"));
}

TEST(Select, MaxScoreArgmax)
{
    const std::vector<KeywordCandidate> cands = {{"alpha", 5.0}, {"bravo", 9.0}};
    EXPECT_EQ(select_representative(cands, SelectionStrategy::max_score, 0), "bravo");
}

TEST(Select, MaxScoreTiesAreLexicographic)
{
    const std::vector<KeywordCandidate> cands = {{"zulu", 9.0}, {"mike", 9.0}, {"alpha", 4.0}};
    EXPECT_EQ(select_representative(cands, SelectionStrategy::max_score, 0), "mike");
}

TEST(Select, EmptyCandidatesAreAbsent)
{
    EXPECT_FALSE(select_representative({}, SelectionStrategy::random, 1).has_value());
    EXPECT_FALSE(select_representative({}, SelectionStrategy::max_score, 1).has_value());
}

TEST(Select, RandomSeed42IsPinned)
{
    const std::vector<KeywordCandidate> cands = {{"solar power", 9.0}, {"battery storage", 4.0}, {"grid inertia", 4.0}};
    EXPECT_EQ(select_representative(cands, SelectionStrategy::random, 42), "battery storage");
    // Candidate order does not matter.
    const std::vector<KeywordCandidate> shuffled = {cands[2], cands[0], cands[1]};
    EXPECT_EQ(select_representative(shuffled, SelectionStrategy::random, 42), "battery storage");
}

TEST(Select, RandomIsRoughlyUniform)
{
    const std::vector<KeywordCandidate> cands = {{"aaaa", 4.0}, {"bbbb", 4.0}, {"cccc", 4.0}};
    std::map<std::string, int> counts;
    for (std::uint64_t seed = 0; seed < 3000; ++seed)
        ++counts[*select_representative(cands, SelectionStrategy::random, seed)];
    for (const auto& [k, n] : counts)
        EXPECT_NEAR(n, 1000, 120) << k;
}

TEST(Select, UnknownStrategyIsConfigError)
{
    EXPECT_THROW(parse_selection_strategy("first"), ConfigError);
    EXPECT_EQ(parse_selection_strategy("max_score"), SelectionStrategy::max_score);
}

TEST(Assign, PoolsCandidatesAcrossQueries)
{
    const std::vector<std::string> queries = {"how do solar panels degrade", "what limits battery storage capacity"};
    KeywordOptions options;
    options.strategy = SelectionStrategy::max_score;
    KeywordStats stats;
    const auto a = assign_keyword("d1", queries, 0, english_stopwords(), default_stop_keywords(), options, &stats);
    EXPECT_EQ(a.doc_id, "d1");
    ASSERT_TRUE(a.keyword.has_value());
    EXPECT_EQ(*a.keyword, "limits battery storage capacity");
    EXPECT_EQ(a.candidates.size(), 2u);
    EXPECT_EQ(stats.kept, 2u);
    EXPECT_EQ(stats.unkeyed, 0u);
}

TEST(Assign, NoSurvivorsMeansUnkeyed)
{
    const std::vector<std::string> queries = {"what is the best way", "is it"};
    KeywordStats stats;
    const auto a = assign_keyword("d1", queries, 0, english_stopwords(), default_stop_keywords(), {}, &stats);
    EXPECT_FALSE(a.keyword.has_value());
    EXPECT_EQ(stats.unkeyed, 1u);
}

TEST(Assignments, JsonlRoundTrip)
{
    std::vector<KeywordAssignment> in = {{"a", "solar power", {{"solar power", 4.0}}}, {"b", std::nullopt, {}}};
    std::stringstream buf;
    write_assignments(buf, in);
    EXPECT_EQ(read_assignments(buf), in);
}
