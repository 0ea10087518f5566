#include <doctest.h>

#include <sstream>

#include "spfit/touchstone.hpp"
#include "test_helpers.hpp"

using namespace spfit;

namespace {

std::vector<double> line_numbers(const std::string& line) {
    std::istringstream is(line);
    std::vector<double> out;
    double v;
    while (is >> v) out.push_back(v);
    return out;
}

std::vector<std::string> body_lines(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::vector<std::string> out;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '!' || line[0] == '#') continue;
        out.push_back(line);
    }
    return out;
}

}  // namespace

TEST_SUITE("touchstone") {

TEST_CASE("parse RI") {
    auto [x, opts] = parse_touchstone("# GHz S RI R 50\n1.0 0.5 -0.25\n", 1);
    CHECK(x.ports() == 1);
    CHECK(x.grid()[0] == 1e9);
    CHECK(x(0, 0, 0) == Complex(0.5, -0.25));
    CHECK(opts.format == TouchstoneFormat::RI);
    CHECK(opts.reference_resistance == 50.0);
}

TEST_CASE("parse MA: unit magnitude at 90 degrees") {
    auto [x, opts] = parse_touchstone("# GHz S MA R 50\n1.0 1.0 90\n", 1);
    CHECK(x(0, 0, 0).real() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(x(0, 0, 0).imag() == doctest::Approx(1.0));
}

TEST_CASE("parse DB: 0 dB 0 degrees is unity") {
    auto [x, opts] = parse_touchstone("# GHz S DB R 50\n1.0 0 0\n", 1);
    CHECK(x(0, 0, 0).real() == doctest::Approx(1.0));
    CHECK(x(0, 0, 0).imag() == doctest::Approx(0.0));
}

TEST_CASE("defaults when the option line is absent") {
    auto [x, opts] = parse_touchstone("1.0 1.0 0\n", 1);
    CHECK(opts.freq_unit_hz == 1e9);
    CHECK(opts.format == TouchstoneFormat::MA);
    CHECK(opts.reference_resistance == 50.0);
    CHECK(x.grid()[0] == 1e9);
    CHECK(x(0, 0, 0) == Complex(1.0, 0.0));
}

TEST_CASE("comments, blank lines and ragged whitespace are ignored") {
    const std::string text =
        "! header comment\n"
        "\n"
        "#   MHz  S  RI   R  75 ! trailing comment\n"
        "  100.0   0.5\t-0.25 ! value comment\n"
        "\n"
        " 200.0 \n  0.125  0.0625\n";
    auto [x, opts] = parse_touchstone(text, 1);
    CHECK(opts.reference_resistance == 75.0);
    CHECK(x.freq_count() == 2);
    CHECK(x.grid()[0] == 1e8);
    CHECK(x.grid()[1] == 2e8);
    CHECK(x(0, 0, 1) == Complex(0.125, 0.0625));
}

TEST_CASE("2-port line order is S11 S21 S12 S22") {
    const std::string text = "# Hz S RI R 50\n5 1 0 2 0 3 0 4 0\n";
    auto [x, opts] = parse_touchstone(text, 2);
    CHECK(x(0, 0, 0).real() == 1.0);
    CHECK(x(1, 0, 0).real() == 2.0);
    CHECK(x(0, 1, 0).real() == 3.0);
    CHECK(x(1, 1, 0).real() == 4.0);
}

TEST_CASE("errors: malformed option, non-increasing frequency, wrong count") {
    CHECK_THROWS_AS(parse_touchstone("# GHz S XY R 50\n1 0 0\n", 1), std::runtime_error);
    CHECK_THROWS_AS(parse_touchstone("# GHz S RI R 50\n2 0 0\n1 0 0\n", 1), std::runtime_error);
    CHECK_THROWS_AS(parse_touchstone("# GHz S RI R 50\n1 0 0 0\n", 1), std::runtime_error);
    CHECK_THROWS_AS(parse_touchstone("# GHz Y RI R 50\n1 0 0\n", 1), std::runtime_error);
    CHECK_THROWS_AS(parse_touchstone("[Version] 2.0\n# GHz S RI R 50\n1 0 0\n", 1),
                    std::runtime_error);
}

TEST_CASE("write emits RI by default with parseable body") {
    Eigen::MatrixXcd data(1, 1);
    data(0, 0) = Complex(1.0, 0.0);
    SParamTensor x(1, FrequencyGrid({1e9}), data);
    const std::string text = write_touchstone(x);
    auto lines = body_lines(text);
    REQUIRE(lines.size() == 1);
    auto nums = line_numbers(lines[0]);
    REQUIRE(nums.size() == 3);
    CHECK(nums[0] == 1.0);   // GHz
    CHECK(nums[1] == 1.0);   // Re
    CHECK(nums[2] == 0.0);   // Im
}

TEST_CASE("4-port blocks wrap as 4 lines of 4 pairs") {
    auto x = test::random_tensor(4, 3, 21);
    const std::string text = write_touchstone(x);
    auto lines = body_lines(text);
    REQUIRE(lines.size() == 3 * 5);  // frequency line + 4 rows per block
    for (int k = 0; k < 3; ++k) {
        CHECK(line_numbers(lines[static_cast<std::size_t>(5 * k)]).size() == 1);
        for (int row = 1; row <= 4; ++row)
            CHECK(line_numbers(lines[static_cast<std::size_t>(5 * k + row)]).size() == 8);
    }
}

TEST_CASE("round-trip across formats and port counts") {
    for (int p : {1, 2, 3, 4}) {
        for (auto fmt : {TouchstoneFormat::RI, TouchstoneFormat::MA, TouchstoneFormat::DB}) {
            auto x = test::random_tensor(p, 16, static_cast<unsigned>(50 + p));
            TouchstoneOptions opts;
            opts.format = fmt;
            const std::string text = write_touchstone(x, opts);
            auto [back, ropts] = parse_touchstone(text, p);
            REQUIRE(back.freq_count() == 16);
            CHECK(ropts.format == fmt);
            double worst = 0.0;
            for (int e = 0; e < p * p; ++e)
                for (int k = 0; k < 16; ++k) {
                    const Complex a = x.entries()(e, k);
                    const Complex b = back.entries()(e, k);
                    worst = std::max(worst, std::abs(a - b) / std::max(1e-30, std::abs(a)));
                }
            CHECK(worst <= 1e-12);
            for (int k = 0; k < 16; ++k)
                CHECK(std::abs(back.grid()[k] - x.grid()[k]) <= 1e-12 * x.grid()[k]);
        }
    }
}

TEST_CASE("ports_from_filename") {
    CHECK(ports_from_filename("chan.s2p") == 2);
    CHECK(ports_from_filename("/tmp/out.S16P") == 16);
    CHECK_THROWS_AS(ports_from_filename("chan.txt"), std::runtime_error);
}

TEST_CASE("csv export magnitudes in dB") {
    Eigen::MatrixXcd ones = Eigen::MatrixXcd::Ones(1, 3);
    SParamTensor a(1, FrequencyGrid({1e9, 2e9, 3e9}), ones);
    Eigen::MatrixXcd tenth = Eigen::MatrixXcd::Constant(1, 3, Complex(0.1, 0.0));
    SParamTensor b(1, a.grid(), tenth);

    const std::string csv = write_results_csv(a.grid(), {{"ref", &a}, {"fit", &b}});
    std::istringstream is(csv);
    std::string header, row;
    std::getline(is, header);
    CHECK(header == "frequency_hz,ref_s11_db,fit_s11_db");
    int rows = 0;
    while (std::getline(is, row)) {
        ++rows;
        auto pos1 = row.find(',');
        auto pos2 = row.find(',', pos1 + 1);
        CHECK(std::stod(row.substr(pos1 + 1, pos2 - pos1 - 1)) == doctest::Approx(0.0));
        CHECK(std::stod(row.substr(pos2 + 1)) == doctest::Approx(-20.0));
    }
    CHECK(rows == 3);

    // column count: 1 + sum of p^2 per tensor
    auto two_port = test::random_tensor(2, 3, 31);
    const std::string csv2 =
        write_results_csv(two_port.grid(), {{"x", &two_port}, {"y", &two_port}});
    std::istringstream is2(csv2);
    std::getline(is2, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 2 * 4);

    SParamTensor other = test::random_tensor(1, 4, 32);
    CHECK_THROWS_AS(write_results_csv(a.grid(), {{"bad", &other}}), std::invalid_argument);
}

}  // TEST_SUITE
