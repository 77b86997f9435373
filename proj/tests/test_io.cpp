#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "ccl/ccl.hpp"
#include "helpers.hpp"

using namespace ccl;
using helpers::make_example;

namespace {

Dataset sample_dataset() {
    Dataset ds;
    ds.num_annotators = 3;
    ds.feature_dim = 2;
    auto a = make_example("a", "g0", {0.25, -1.5}, {1, 1, 0}, 2);
    a.latent_difficulty = 0.125;
    a.latent_truth = 1;
    ds.examples.push_back(a);
    ds.examples.push_back(make_example("b", "g1", {1e-3, 3.0}, {0, 0, 0}, 1));
    return ds;
}

}  // namespace

TEST_CASE("jsonl dataset round trip preserves everything") {
    const auto dir = helpers::scratch_dir("io_jsonl");
    const auto path = dir + "/data.jsonl";
    const auto ds = sample_dataset();
    save_dataset(ds, path);
    const auto back = load_dataset(path);

    REQUIRE(back.size() == 2);
    CHECK(back.num_annotators == 3);
    CHECK(back.feature_dim == 2);
    CHECK(back.examples[0].id == "a");
    CHECK(back.examples[0].group_id == "g0");
    CHECK(back.examples[0].features == std::vector<double>{0.25, -1.5});
    CHECK(back.examples[0].annotator_labels == std::vector<int>{1, 1, 0});
    REQUIRE(back.examples[0].direct_difficulty);
    CHECK(*back.examples[0].direct_difficulty == 2);
    REQUIRE(back.examples[0].latent_difficulty);
    CHECK(*back.examples[0].latent_difficulty == 0.125);
    REQUIRE(back.examples[0].latent_truth);
    CHECK(*back.examples[0].latent_truth == 1);
    CHECK_FALSE(back.examples[1].latent_difficulty);
}

TEST_CASE("csv dataset round trip with sidecar meta") {
    const auto dir = helpers::scratch_dir("io_csv");
    const auto path = dir + "/data.csv";
    const auto ds = sample_dataset();
    save_dataset(ds, path);
    CHECK(std::filesystem::exists(path + ".meta.json"));

    const auto back = load_dataset(path);
    REQUIRE(back.size() == 2);
    CHECK(back.num_annotators == 3);
    CHECK(back.feature_dim == 2);
    CHECK(back.examples[0].features == std::vector<double>{0.25, -1.5});
    REQUIRE(back.examples[1].direct_difficulty);
    CHECK(*back.examples[1].direct_difficulty == 1);
}

TEST_CASE("csv loads without the sidecar by inferring the header") {
    const auto dir = helpers::scratch_dir("io_csv_noside");
    const auto path = dir + "/data.csv";
    save_dataset(sample_dataset(), path);
    std::filesystem::remove(path + ".meta.json");
    const auto back = load_dataset(path);
    CHECK(back.num_annotators == 3);
    CHECK(back.feature_dim == 2);
}

TEST_CASE("jsonl parse errors carry line numbers") {
    const auto dir = helpers::scratch_dir("io_bad");
    const auto path = dir + "/bad.jsonl";
    {
        std::ofstream out(path);
        out << R"({"_meta":{"num_annotators":2,"feature_dim":1,"class_names":["class0","class1"]}})"
            << "\n";
        out << R"({"id":"a","group_id":"g","features":[0.5],"annotator_labels":[1,0]})" << "\n";
        out << "this is not json\n";
    }
    try {
        load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("loading an unknown extension fails") {
    CHECK_THROWS_AS(load_dataset("data.parquet"), ValidationError);
    CHECK_THROWS_AS(load_dataset("missing_file.jsonl"), IoError);
}

TEST_CASE("loaded datasets are validated") {
    const auto dir = helpers::scratch_dir("io_invalid");
    const auto path = dir + "/bad.jsonl";
    {
        std::ofstream out(path);
        out << R"({"_meta":{"num_annotators":2,"feature_dim":1,"class_names":["class0","class1"]}})"
            << "\n";
        out << R"({"id":"a","group_id":"g","features":[0.5],"annotator_labels":[1,0,1]})" << "\n";
    }
    CHECK_THROWS_AS(load_dataset(path), SchemaError);
}

TEST_CASE("assignment jsonl round trip") {
    const auto dir = helpers::scratch_dir("io_asg");
    const auto path = dir + "/asg.jsonl";
    DifficultyAssignment asg;
    asg.granularity = Granularity::fine;
    asg.source = DifficultySource::agreement;
    asg.bins = {{"a", DifficultyLevel::very_easy},
                {"b", DifficultyLevel::hard},
                {"c", DifficultyLevel::very_hard}};
    save_assignment_jsonl(asg, path);
    const auto back = load_assignment_jsonl(path);
    CHECK(back.granularity == Granularity::fine);
    CHECK(back.source == DifficultySource::agreement);
    CHECK(back.bins == asg.bins);
}

TEST_CASE("assignment loader rejects duplicates and mixed sources") {
    const auto dir = helpers::scratch_dir("io_asg_bad");
    const auto dup = dir + "/dup.jsonl";
    {
        std::ofstream out(dup);
        out << R"({"id":"a","level":"easy","source":"agreement"})" << "\n";
        out << R"({"id":"a","level":"hard","source":"agreement"})" << "\n";
    }
    CHECK_THROWS_AS(load_assignment_jsonl(dup), ParseError);

    const auto mixed = dir + "/mixed.jsonl";
    {
        std::ofstream out(mixed);
        out << R"({"id":"a","level":"easy","source":"agreement"})" << "\n";
        out << R"({"id":"b","level":"hard","source":"self_taught"})" << "\n";
    }
    CHECK_THROWS_AS(load_assignment_jsonl(mixed), ParseError);
}
