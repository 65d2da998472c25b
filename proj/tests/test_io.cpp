#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "gpcheck/io.hpp"

using namespace gpcheck;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("gpcheck_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void expect_same_profile(const RadialPotential& a, const RadialPotential& b) {
    for (double r = 0.0; r < 3.0; r += 0.01) EXPECT_DOUBLE_EQ(a(r), b(r)) << "r = " << r;
}

} // namespace

TEST(SpecJson, SquareShape) {
    const json j = {{"shape", "square"}, {"r1", 1.0}, {"r2", 1.0}, {"R", 1.25}, {"barrier", 100.0}, {"well", 0.005}};
    const auto s = spec_from_json(j);
    EXPECT_DOUBLE_EQ(s.lambda_plus(), 100.0);
    EXPECT_DOUBLE_EQ(s.lambda_minus(), 0.005);
    EXPECT_DOUBLE_EQ(s.epsilon(), 0.5);
    EXPECT_DOUBLE_EQ(s.potential()(0.5), 100.0);
    EXPECT_DOUBLE_EQ(s.potential()(1.1), -0.005);
}

TEST(SpecJson, RoundTripEverySample) {
    int seen = 0;
    for (const auto& e : fs::directory_iterator(GPCHECK_SAMPLES_DIR)) {
        if (e.path().extension() != ".json") continue;
        const auto s = load_spec(e.path());
        const auto back = spec_from_json(spec_to_json(s));
        EXPECT_DOUBLE_EQ(back.r1(), s.r1());
        EXPECT_DOUBLE_EQ(back.R(), s.R());
        EXPECT_DOUBLE_EQ(back.epsilon(), s.epsilon());
        expect_same_profile(back.vplus(), s.vplus());
        expect_same_profile(back.vminus(), s.vminus());
        ++seen;
    }
    EXPECT_GE(seen, 4);
}

TEST(SpecJson, ProfileKinds) {
    const json lin = {{"kind", "linear"}, {"r", {0.0, 1.0}}, {"v", {2.0, 0.0}}};
    EXPECT_DOUBLE_EQ(profile_from_json(lin)(0.25), 1.5);
    const json seg = {{"kind", "segments"}, {"segments", {{0.0, 1.0, 1.0, 3.0}}}};
    EXPECT_DOUBLE_EQ(profile_from_json(seg)(0.5), 2.0);
    EXPECT_THROW(profile_from_json(json{{"kind", "spline"}, {"r", {0.0, 1.0}}, {"v", {1.0}}}), ParameterError);
    EXPECT_TRUE(profile_from_json(json(nullptr)).empty());
}

TEST(SpecJson, ErrorsAreParameterErrors) {
    const auto dir = scratch_dir("errors");
    EXPECT_THROW(load_spec(dir / "absent.json"), ParameterError);
    std::ofstream(dir / "broken.json") << "{ \"r1\": 1.0, ";
    EXPECT_THROW(load_spec(dir / "broken.json"), ParameterError);
    std::ofstream(dir / "partial.json") << R"({"r1": 1.0, "r2": 1.0})";
    EXPECT_THROW(load_spec(dir / "partial.json"), ParameterError);
}

TEST(CsvTable, MetadataHeaderAndFullPrecision) {
    CsvTable t(json{{"seed", 3}}, {"t", "value"});
    t.add({0.1, 1.0 / 3.0});
    const std::string s = t.str();
    EXPECT_EQ(s, "# {\"seed\":3}\nt,value\n0.10000000000000001,0.33333333333333331\n");
    EXPECT_THROW(t.add({1.0}), DimensionError);
}

TEST(Snapshot, RoundTripIsBitExact) {
    const auto dir = scratch_dir("snapshot");
    const PeriodicGrid g(2, 8, 3.0);
    const double c[] = {0.1, -0.4}, k[] = {2.0, 1.0};
    GPField f = GPField::gaussian(g, 0.5, c, k);
    f.time = 0.125;
    write_snapshot(dir / "field", f, json{{"note", "test"}});
    const auto back = read_snapshot(dir / "field");
    EXPECT_EQ(back.grid, g);
    EXPECT_DOUBLE_EQ(back.time, 0.125);
    ASSERT_EQ(back.values.size(), f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) EXPECT_EQ(back.values[i], f.values[i]);
}

TEST(Snapshot, TruncatedBinaryIsRejected) {
    const auto dir = scratch_dir("truncated");
    write_snapshot(dir / "field", GPField::gaussian(PeriodicGrid(1, 16, 3.0), 0.5));
    fs::resize_file(dir / "field.bin", 40);
    EXPECT_THROW(read_snapshot(dir / "field"), ParameterError);
}

TEST(ReportJson, ValidationFields) {
    const auto rep = validate_assumption(PotentialSpec::square(1.0, 1.0, 1.25, 100.0, 0.005, 0.5));
    const auto j = to_json(rep);
    EXPECT_EQ(j.at("n1").get<int>(), 110);
    EXPECT_TRUE(j.at("overall").get<bool>());
    EXPECT_DOUBLE_EQ(j.at("largest_passing_epsilon").get<double>(), 0.93);
}

TEST(ReportJson, PartitionMatchesFlagEvenMismatch) {
    const auto odd = to_json(partition_identities(5));
    EXPECT_TRUE(odd.at("all_match").get<bool>());
    const auto even = to_json(partition_identities(6));
    EXPECT_FALSE(even.at("all_match").get<bool>());
    EXPECT_TRUE(even.at("matches").at("single_pi1").get<bool>());
    EXPECT_EQ(even.at("ratios").at("pair_11").get<std::string>(), "1/5");
}
