#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "rein/error.hpp"
#include "rein/toolkit.hpp"

using namespace rein;

namespace {

const json kReportArgs{{"summary", "user rejected the reply"},
                       {"ambiguous_content", "that one"},
                       {"system_uncertainty", "which reservation"}};

}  // namespace

TEST_CASE("register_tool") {
    ToolRegistry reg;
    reg.register_tool(transfer_tool_spec(), transfer_handler());
    CHECK(reg.size() == 1);
    CHECK_THROWS_AS(reg.register_tool(transfer_tool_spec(), transfer_handler()), DuplicateName);
    reg.register_tool(report_tool_spec(), report_handler());
    auto rec = reg.recovery_tools();
    CHECK(rec.size() == 2);
    for (const auto* s : rec) CHECK(s->recovery_plan_tag.has_value());
    CHECK(reg.without(kReportTool).size() == 1);
    CHECK(reg.without("nope").size() == 2);
}

TEST_CASE("recovery tool specs match the shipped schema files") {
    auto reg = load_registry(fixtures::data_dir() / "tools", Domain::AirlineMini);
    CHECK(*reg.find(kReportTool) == report_tool_spec());
    CHECK(*reg.find(kTransferTool) == transfer_tool_spec());
    CHECK(reg.find(kReportTool)->recovery_plan_tag == RecoveryPlanTag::InternalReport);
    CHECK(reg.find(kTransferTool)->recovery_plan_tag == RecoveryPlanTag::HumanTransfer);
    for (const char* name : {"get_user_details", "get_reservation_details", "search_flights", "book_reservation",
                             "update_reservation_flights", "update_reservation_baggages", "cancel_reservation", "think"})
        CHECK_MESSAGE(reg.find(name) != nullptr, name);
}

TEST_CASE("validate_args") {
    const ToolSpec report = report_tool_spec();
    CHECK(validate_args(report, kReportArgs).ok());

    json missing = kReportArgs;
    missing.erase("system_uncertainty");
    auto v = validate_args(report, missing);
    REQUIRE_FALSE(v.ok());
    CHECK(v.issues[0].field == "system_uncertainty");

    json wrong = kReportArgs;
    wrong["summary"] = 42;
    v = validate_args(report, wrong);
    REQUIRE_FALSE(v.ok());
    CHECK(v.issues[0].field == "summary");

    json extra = kReportArgs;
    extra["bogus"] = "x";
    CHECK_FALSE(validate_args(report, extra).ok());

    json arr = kReportArgs;
    arr["deferred_actions"] = json::array({"cancel", 3});
    CHECK_FALSE(validate_args(report, arr).ok());
    arr["deferred_actions"] = json::array({"cancel"});
    CHECK(validate_args(report, arr).ok());

    json enum_schema{{"type", "object"},
                     {"properties", {{"cabin", {{"type", "string"}, {"enum", {"economy", "business"}}}}}},
                     {"required", {"cabin"}}};
    CHECK(validate_json(enum_schema, {{"cabin", "economy"}}).ok());
    CHECK_FALSE(validate_json(enum_schema, {{"cabin", "first"}}).ok());
    CHECK_FALSE(validate_json(enum_schema, json::array()).ok());
}

TEST_CASE("every schema file round-trips bit-exactly") {
    for (auto d : {Domain::AirlineMini, Domain::RetailMini}) {
        auto src = fixtures::data_dir() / "tools" / std::string(to_string(d));
        auto reg = load_registry(fixtures::data_dir() / "tools", d);
        fixtures::TempDir tmp;
        save_registry(tmp.path(), d, reg);
        auto a = fixtures::snapshot(src);
        auto b = fixtures::snapshot(tmp.path() / std::string(to_string(d)));
        CHECK(a == b);
        CHECK(load_registry(tmp.path(), d).specs() == reg.specs());
        for (const auto& s : reg.specs())
            CHECK(tool_spec_from_schema(tool_schema_json(s), s.mutates_state, s.recovery_plan_tag) == s);
    }
}

TEST_CASE("invoke_tool") {
    auto dd = fixtures::domain(Domain::AirlineMini);
    const auto& reg = dd.registry;
    const Environment& env = dd.env;
    const std::string before = state_digest(env);

    SUBCASE("report") {
        auto r = invoke_tool(env, reg, kReportTool, kReportArgs);
        CHECK(r.outcome.is_ok());
        CHECK(r.env.report_log().size() == 1);
        CHECK(state_digest(r.env) == before);
        CHECK(r.env.audit_log().empty());
    }
    SUBCASE("transfer") {
        auto r = invoke_tool(env, reg, kTransferTool, {{"summary", "not supported"}});
        CHECK(r.outcome.is_ok());
        CHECK(r.env.transfer_flag());
        CHECK(r.env.transfer_seq().has_value());
        CHECK(state_digest(r.env) == before);
        // monotone
        auto again = invoke_tool(r.env, reg, "get_user_details", {{"user_id", "mia_li_3668"}});
        CHECK(again.env.transfer_flag());
    }
    SUBCASE("mutation on a missing id is a domain error and changes nothing") {
        auto r = invoke_tool(env, reg, "cancel_reservation", {{"reservation_id", "ZZZZZZ"}});
        CHECK(r.outcome.status == ToolStatus::DomainError);
        CHECK(r.env == env);
    }
    SUBCASE("validation errors change nothing") {
        auto r = invoke_tool(env, reg, "cancel_reservation", {{"reservation_id", 5}});
        CHECK(r.outcome.status == ToolStatus::ValidationError);
        CHECK(r.env == env);
    }
    SUBCASE("successful mutation is audited") {
        auto r = invoke_tool(env, reg, "cancel_reservation", {{"reservation_id", "NO6JO3"}});
        REQUIRE(r.outcome.is_ok());
        CHECK(r.env.audit_log().size() == 1);
        CHECK(r.env.audit_log()[0].tool == "cancel_reservation");
        CHECK(r.env.tables()["reservations"]["NO6JO3"]["status"] == "cancelled");
        CHECK(state_digest(r.env) != before);
        r.env.check_integrity();
    }
    SUBCASE("think records nothing in the tables") {
        auto r = invoke_tool(env, reg, "think", {{"thought", "hmm"}});
        CHECK(r.outcome.is_ok());
        CHECK(state_digest(r.env) == before);
    }
    SUBCASE("unknown tool") { CHECK_THROWS_AS(invoke_tool(env, reg, "fly_me_to_the_moon", json::object()), UnknownTool); }
}

TEST_CASE("failed calls never change the digest") {
    // random argument soup against every tool of both domains
    std::mt19937 rng(21);
    const json junk[] = {json(nullptr), json(1), json("x"), json::array(), json{{"reservation_id", "NOPE"}},
                         json{{"order_id", "#W0"}}, json{{"user_id", 3}}, json::object()};
    for (auto d : {Domain::AirlineMini, Domain::RetailMini}) {
        auto dd = fixtures::domain(d);
        for (const auto& spec : dd.registry.specs()) {
            for (int i = 0; i < 10; ++i) {
                const json& args = junk[rng() % std::size(junk)];
                auto r = invoke_tool(dd.env, dd.registry, spec.name, args);
                if (!r.outcome.is_ok()) {
                    CHECK(state_digest(r.env) == state_digest(dd.env));
                    CHECK(r.env == dd.env);
                }
                if (spec.is_recovery || !spec.mutates_state) CHECK(state_digest(r.env) == state_digest(dd.env));
            }
        }
    }
}

TEST_CASE("state_digest is canonical") {
    json a = json::object(), b = json::object();
    a["users"]["u1"] = {{"name", "A"}, {"age", 3}};
    a["users"]["u2"] = {{"name", "B"}};
    b["users"]["u2"] = {{"name", "B"}};
    b["users"]["u1"] = {{"age", 3}, {"name", "A"}};
    Environment ea(Domain::AirlineMini, a), eb(Domain::AirlineMini, b);
    CHECK(state_digest(ea) == state_digest(eb));
    eb.append_report({{"x", 1}});
    eb.set_transfer();
    CHECK(state_digest(ea) == state_digest(eb));
    eb.tables()["users"]["u1"]["age"] = 4;
    CHECK(state_digest(ea) != state_digest(eb));
    CHECK(state_digest(ea).size() == 64);
}

TEST_CASE("apply_ground_truth") {
    auto dd = fixtures::domain(Domain::AirlineMini);
    CHECK(apply_ground_truth(dd.env, dd.registry, {}) == dd.env);

    auto gt = std::vector<ControlAction>{ControlAction::tool("cancel_reservation", {{"reservation_id", "NO6JO3"}})};
    auto e1 = apply_ground_truth(dd.env, dd.registry, gt);
    auto e2 = apply_ground_truth(dd.env, dd.registry, gt);
    CHECK(e1.tables()["reservations"]["NO6JO3"]["status"] == "cancelled");
    auto q = invoke_tool(e1, dd.registry, "get_reservation_details", {{"reservation_id", "NO6JO3"}});
    CHECK(q.outcome.payload.dump().find("cancelled") != std::string::npos);
    CHECK(state_digest(e1) == state_digest(e2));

    CHECK_THROWS_AS(apply_ground_truth(dd.env, dd.registry,
                                       {ControlAction::tool("get_reservation_details", {{"reservation_id", "NO6JO3"}})}),
                    GroundTruthFailed);
    CHECK_THROWS_AS(apply_ground_truth(dd.env, dd.registry, {ControlAction::respond("done")}), GroundTruthFailed);
    CHECK_THROWS_AS(apply_ground_truth(dd.env, dd.registry,
                                       {ControlAction::tool("cancel_reservation", {{"reservation_id", "NOPE00"}})}),
                    GroundTruthFailed);
}

TEST_CASE("fixture databases keep referential integrity") {
    for (auto d : {Domain::AirlineMini, Domain::RetailMini}) CHECK_NOTHROW(fixtures::domain(d).env.check_integrity());
    auto dd = fixtures::domain(Domain::AirlineMini);
    dd.env.tables()["reservations"]["NO6JO3"]["user_id"] = "ghost";
    CHECK_THROWS_AS(dd.env.check_integrity(), InvalidValue);
}
