#include "stabledrift/validate.hpp"
#include "stabledrift/errors.hpp"

#include "doctest.h"

#include <cmath>

using namespace sdrift;
using kato::DriftField;

namespace {

const auto P1 = stable::StableParams::make(1, 1.5);

heat::SeriesKernel full_kernel(const DriftField& b) {
    validate::IdentityConfig c;
    heat::SeriesOptions so;
    so.full_table = true;
    return heat::series_sum(P1, b, heat::make_grid(P1, c.grid), so);
}

const heat::SeriesKernel& constant_kernel() {
    static const auto k = full_kernel(DriftField::constant(1, {0.5, 0, 0}));
    return k;
}

const heat::SeriesKernel& zero_kernel() {
    static const auto k = full_kernel(DriftField::zero(1));
    return k;
}

}  // namespace

TEST_CASE("identity suite passes for the zero drift") {
    validate::IdentityConfig c;
    const auto r = validate::run_identity_suite(zero_kernel(), c);
    INFO(validate::render_text(r));
    CHECK(r.passed());
    REQUIRE(r.find("translation_oracle") != nullptr);
    CHECK(r.find("translation_oracle")->measured < 1e-4);
    CHECK(r.find("chapman_kolmogorov") != nullptr);
    CHECK(r.find("generator_weak_limit") != nullptr);
    CHECK(r.constants.at("T0") == doctest::Approx(0.5));
}

TEST_CASE("identity suite passes for a constant drift and flags an injected negative cell") {
    validate::IdentityConfig c;
    const auto r = validate::run_identity_suite(constant_kernel(), c);
    INFO(validate::render_text(r));
    CHECK(r.passed());
    CHECK(r.records.size() == 8);
    CHECK(r.constants.at("C2_fit") >= 1.0);

    c.inject_negative_cell = true;
    const auto bad = validate::run_identity_suite(constant_kernel(), c);
    CHECK_FALSE(bad.passed());
    REQUIRE(bad.find("positivity") != nullptr);
    CHECK_FALSE(bad.find("positivity")->passed);
    CHECK(bad.find("positivity")->measured == doctest::Approx(-1e-3));
    CHECK(bad.find("duhamel_residual")->passed);
    CHECK(validate::render_text(bad).find("FAIL") != std::string::npos);
}

TEST_CASE("report JSON round trip keeps every field") {
    validate::ValidationReport r;
    r.suite = "demo";
    r.provenance = {"abc123", 42};
    r.add("a", 1e-4, 1e-3, "<=", "first");
    r.add("b", 0.5, 1.0, ">=", "second");
    r.add("c", std::nan(""), 1.0);
    r.constants["lambda0"] = 2.7698;
    r.notes.push_back("note");
    CHECK(r.failures() == 2);
    const auto back = validate::from_json_string(validate::to_json_string(r));
    CHECK(back.suite == "demo");
    CHECK(back.provenance.config_hash == "abc123");
    CHECK(back.provenance.seed == 42);
    REQUIRE(back.records.size() == 3);
    CHECK(back.records[0].measured == r.records[0].measured);
    CHECK(back.records[0].passed);
    CHECK_FALSE(back.records[1].passed);
    CHECK(std::isnan(back.records[2].measured));
    CHECK(back.constants.at("lambda0") == 2.7698);
    CHECK(back.notes == r.notes);
    CHECK_THROWS_AS(validate::from_json_string("{\"schema_version\": 99}"), ConfigError);
    CHECK_THROWS_AS(validate::from_json_string("not json"), ConfigError);
}

TEST_CASE("timed_check prefixes numerical errors with the check name") {
    validate::ValidationReport r;
    try {
        validate::timed_check(r, "probe", []() -> validate::CheckRecord { throw AccuracyError("row too heavy"); });
        FAIL("no throw");
    } catch (const AccuracyError& e) {
        CHECK(std::string(e.what()).find("probe") != std::string::npos);
        CHECK(e.exit_code() == kExitNumericalFailure);
    }
    CHECK(r.records.empty());
}

TEST_CASE("kernel Laplace transform of the free kernel matches the resolvent") {
    const auto g = bump(1, 1.0);
    const resolvent::ResolventKernel rk(P1, 2.0);
    for (double x : {0.0, 0.5, -1.0}) {
        const auto lt = validate::kernel_laplace(zero_kernel(), x, g, 2.0, 1e-4);
        const double ref = resolvent::apply_resolvent(rk, g, std::vector<double>{x});
        CHECK(lt.horizon > 0.5);  // exercises propagation past the certified block
        CHECK(lt.error < 1e-4);
        CHECK(std::fabs(lt.value - ref) < 2e-4);
    }
    CHECK_THROWS_AS(validate::kernel_laplace(zero_kernel(), 0.0123, g, 2.0, 1e-4), DomainError);
    CHECK_THROWS_AS(validate::kernel_laplace(zero_kernel(), 0.0, g, -1.0, 1e-4), DomainError);
}

TEST_CASE("constant drift: four resolvent constructions agree") {
    validate::CrossConfig c;
    c.euler_paths = 5000;
    c.chain_paths = 5000;
    c.seed = 7;
    const auto b = DriftField::constant(1, {0.5, 0, 0});
    const auto r = validate::cross_validate(b, c, constant_kernel());
    INFO(validate::render_text(r));
    CHECK(r.records.size() == 3 * 3 * 6);
    CHECK(r.passed());
    CHECK(r.constants.at("lambda") >= r.constants.at("lambda0"));
    for (const auto& rec : r.records)
        if (rec.name.find("laplace-neumann") != std::string::npos) CHECK(rec.measured < 5e-4);
}

TEST_CASE("cross validation rejects lambda at or below lambda0") {
    validate::CrossConfig c;
    c.lambda = 0.1;
    CHECK_THROWS_AS(validate::cross_validate(DriftField::constant(1, {0.5, 0, 0}), c, constant_kernel()), DomainError);
}

TEST_CASE("noise probe: reconstructed increments look like the free stable noise") {
    validate::NoiseConfig c;
    c.n_paths = 10000;
    c.horizon = 0.5;
    const auto r = validate::noise_uniqueness_probe(constant_kernel(), c);
    INFO(validate::render_text(r));
    CHECK(r.passed());
    CHECK(r.find("cf_at_zero")->measured == 0.0);
    CHECK(r.find("lag1_factorization") != nullptr);
}
