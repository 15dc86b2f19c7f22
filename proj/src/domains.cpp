// Business tool implementations for the two fixture domains.
//
// Money is stored in integer minor units (cents) everywhere.

#include <algorithm>
#include <cstdio>

#include "rein/error.hpp"
#include "rein/toolkit.hpp"

namespace rein {

namespace {

constexpr long long kBagFee = 5000;        // per non-free checked bag
constexpr long long kInsuranceFee = 3000;  // per passenger

// Fails the current tool call with a DomainError outcome.
struct DomainFailure {
    std::string message;
};

[[noreturn]] void fail(std::string message) { throw DomainFailure{std::move(message)}; }

ToolHandler guarded(std::function<json(Environment&, const json&)> body) {
    return [body = std::move(body)](Environment& env, const json& args) {
        try {
            return ToolOutcome::ok(body(env, args));
        } catch (const DomainFailure& f) {
            return ToolOutcome::domain_error(f.message);
        }
    };
}

json& row(Environment& env, const char* table, const std::string& id, const char* what) {
    json& t = env.tables()[table];
    if (!t.contains(id)) fail(std::string(what) + " '" + id + "' not found");
    return t[id];
}

// Debits a stored-value method; credit cards and paypal are unbounded.
void charge(json& user, const std::string& payment_id, long long amount, const char* balance_key) {
    if (!user["payment_methods"].contains(payment_id)) fail("payment method '" + payment_id + "' not found");
    if (amount <= 0) return;
    json& pm = user["payment_methods"][payment_id];
    if (pm.contains(balance_key)) {
        long long balance = pm[balance_key].get<long long>();
        if (balance < amount) fail("insufficient balance on '" + payment_id + "'");
        pm[balance_key] = balance - amount;
    }
}

void refund(json& user, const std::string& payment_id, long long amount, const char* balance_key) {
    if (!user["payment_methods"].contains(payment_id)) fail("payment method '" + payment_id + "' not found");
    json& pm = user["payment_methods"][payment_id];
    if (amount > 0 && pm.contains(balance_key)) pm[balance_key] = pm[balance_key].get<long long>() + amount;
}

// --- airline ---------------------------------------------------------------

json& flight_date(Environment& env, const std::string& number, const std::string& date) {
    json& flight = row(env, "flights", number, "flight");
    if (!flight["dates"].contains(date)) fail("flight " + number + " does not operate on " + date);
    json& d = flight["dates"][date];
    if (d.value("status", "") != "available") fail("flight " + number + " on " + date + " is not available");
    return d;
}

void take_seats(Environment& env, const json& flights, const std::string& cabin, long long n) {
    for (const auto& f : flights) {
        json& d = flight_date(env, f.at("flight_number").get<std::string>(), f.at("date").get<std::string>());
        long long seats = d["available_seats"][cabin].get<long long>();
        if (seats < n) fail("not enough " + cabin + " seats on " + f.at("flight_number").get<std::string>());
        d["available_seats"][cabin] = seats - n;
    }
}

void release_seats(Environment& env, const json& flights, const std::string& cabin, long long n) {
    for (const auto& f : flights) {
        json& flight = env.tables()["flights"][f.at("flight_number").get<std::string>()];
        json& d = flight["dates"][f.at("date").get<std::string>()];
        d["available_seats"][cabin] = d["available_seats"][cabin].get<long long>() + n;
    }
}

// Returns the priced segment list for a cabin.
json price_segments(Environment& env, const json& flights, const std::string& cabin, long long& total) {
    json out = json::array();
    total = 0;
    for (const auto& f : flights) {
        const auto number = f.at("flight_number").get<std::string>();
        const auto date = f.at("date").get<std::string>();
        long long price = flight_date(env, number, date)["prices"][cabin].get<long long>();
        total += price;
        out.push_back({{"flight_number", number}, {"date", date}, {"price", price}});
    }
    return out;
}

long long flight_total(const json& reservation) {
    long long t = 0;
    for (const auto& f : reservation.at("flights")) t += f.at("price").get<long long>();
    return t;
}

json& active_reservation(Environment& env, const std::string& id) {
    json& r = row(env, "reservations", id, "reservation");
    if (r.value("status", "active") == "cancelled") fail("reservation '" + id + "' is cancelled");
    return r;
}

std::map<std::string, ToolHandler> airline_handlers() {
    std::map<std::string, ToolHandler> h;

    h["get_user_details"] = guarded([](Environment& env, const json& a) {
        return row(env, "users", a.at("user_id").get<std::string>(), "user");
    });

    h["get_reservation_details"] = guarded([](Environment& env, const json& a) {
        return row(env, "reservations", a.at("reservation_id").get<std::string>(), "reservation");
    });

    h["search_flights"] = guarded([](Environment& env, const json& a) {
        const auto origin = a.at("origin").get<std::string>();
        const auto destination = a.at("destination").get<std::string>();
        const auto date = a.at("date").get<std::string>();
        json out = json::array();
        for (const auto& [number, f] : env.tables()["flights"].items()) {
            if (f.at("origin") != origin || f.at("destination") != destination) continue;
            if (!f.at("dates").contains(date)) continue;
            const json& d = f.at("dates").at(date);
            if (d.value("status", "") != "available") continue;
            out.push_back({{"flight_number", number},
                           {"origin", origin},
                           {"destination", destination},
                           {"date", date},
                           {"departure_time", f.value("departure_time", "")},
                           {"available_seats", d.at("available_seats")},
                           {"prices", d.at("prices")}});
        }
        return out;
    });

    h["book_reservation"] = guarded([](Environment& env, const json& a) {
        const auto user_id = a.at("user_id").get<std::string>();
        json& user = row(env, "users", user_id, "user");
        const auto cabin = a.at("cabin").get<std::string>();
        const long long passengers = static_cast<long long>(a.at("passengers").size());
        if (passengers == 0) fail("at least one passenger is required");
        if (a.at("flights").empty()) fail("at least one flight is required");
        if (a.at("nonfree_baggages").get<long long>() > a.at("total_baggages").get<long long>())
            fail("nonfree_baggages exceeds total_baggages");
        long long per_passenger = 0;
        json segments = price_segments(env, a.at("flights"), cabin, per_passenger);
        long long total = per_passenger * passengers + a.at("nonfree_baggages").get<long long>() * kBagFee;
        if (a.at("insurance") == "yes") total += kInsuranceFee * passengers;
        const auto payment_id = a.at("payment_id").get<std::string>();
        charge(user, payment_id, total, "amount");
        take_seats(env, a.at("flights"), cabin, passengers);

        char id[16];
        std::snprintf(id, sizeof id, "RES%03zu", env.tables()["reservations"].size() + 1);
        json r{{"reservation_id", id},
               {"user_id", user_id},
               {"origin", a.at("origin")},
               {"destination", a.at("destination")},
               {"flight_type", a.at("flight_type")},
               {"cabin", cabin},
               {"flights", segments},
               {"passengers", a.at("passengers")},
               {"payment_history", json::array({{{"payment_id", payment_id}, {"amount", total}}})},
               {"total_baggages", a.at("total_baggages")},
               {"nonfree_baggages", a.at("nonfree_baggages")},
               {"insurance", a.at("insurance")},
               {"status", "active"}};
        env.tables()["reservations"][id] = r;
        user["reservations"].push_back(id);
        return r;
    });

    h["update_reservation_flights"] = guarded([](Environment& env, const json& a) {
        const auto id = a.at("reservation_id").get<std::string>();
        json& r = active_reservation(env, id);
        json& user = row(env, "users", r.at("user_id").get<std::string>(), "user");
        const long long passengers = static_cast<long long>(r.at("passengers").size());
        const auto old_cabin = r.at("cabin").get<std::string>();
        const auto cabin = a.at("cabin").get<std::string>();
        if (a.at("flights").empty()) fail("at least one flight is required");
        const long long old_total = flight_total(r) * passengers;
        release_seats(env, r.at("flights"), old_cabin, passengers);
        long long per_passenger = 0;
        json segments = price_segments(env, a.at("flights"), cabin, per_passenger);
        take_seats(env, a.at("flights"), cabin, passengers);
        const long long diff = per_passenger * passengers - old_total;
        const auto payment_id = a.at("payment_id").get<std::string>();
        if (diff > 0) charge(user, payment_id, diff, "amount");
        else refund(user, payment_id, -diff, "amount");
        r["flights"] = segments;
        r["cabin"] = cabin;
        r["payment_history"].push_back({{"payment_id", payment_id}, {"amount", diff}});
        return r;
    });

    h["update_reservation_baggages"] = guarded([](Environment& env, const json& a) {
        const auto id = a.at("reservation_id").get<std::string>();
        json& r = active_reservation(env, id);
        json& user = row(env, "users", r.at("user_id").get<std::string>(), "user");
        const long long total = a.at("total_baggages").get<long long>();
        const long long nonfree = a.at("nonfree_baggages").get<long long>();
        if (nonfree > total || total < 0 || nonfree < 0) fail("invalid baggage counts");
        const long long extra = nonfree - r.at("nonfree_baggages").get<long long>();
        const auto payment_id = a.at("payment_id").get<std::string>();
        if (extra > 0) {
            charge(user, payment_id, extra * kBagFee, "amount");
            r["payment_history"].push_back({{"payment_id", payment_id}, {"amount", extra * kBagFee}});
        }
        r["total_baggages"] = total;
        r["nonfree_baggages"] = nonfree;
        return r;
    });

    h["cancel_reservation"] = guarded([](Environment& env, const json& a) {
        const auto id = a.at("reservation_id").get<std::string>();
        json& r = active_reservation(env, id);
        json& user = row(env, "users", r.at("user_id").get<std::string>(), "user");
        for (const auto& p : r.at("payment_history")) {
            const long long amount = p.at("amount").get<long long>();
            if (amount > 0) refund(user, p.at("payment_id").get<std::string>(), amount, "amount");
        }
        release_seats(env, r.at("flights"), r.at("cabin").get<std::string>(),
                      static_cast<long long>(r.at("passengers").size()));
        r["status"] = "cancelled";
        return r;
    });

    return h;
}

// --- retail ----------------------------------------------------------------

json& order_in_status(Environment& env, const std::string& id, const char* status) {
    json& o = row(env, "orders", id, "order");
    if (o.at("status") != status) fail("order '" + id + "' is not " + status);
    return o;
}

// Looks up the order lines named by item_ids; each line may be used once.
std::vector<std::size_t> pick_lines(const json& order, const json& item_ids) {
    if (item_ids.empty()) fail("item_ids must not be empty");
    std::vector<std::size_t> picked;
    for (const auto& want : item_ids) {
        bool found = false;
        for (std::size_t i = 0; i < order.at("items").size(); ++i) {
            if (std::find(picked.begin(), picked.end(), i) != picked.end()) continue;
            if (order.at("items")[i].at("item_id") == want) {
                picked.push_back(i);
                found = true;
                break;
            }
        }
        if (!found) fail("item '" + want.get<std::string>() + "' not in order");
    }
    return picked;
}

std::map<std::string, ToolHandler> retail_handlers() {
    std::map<std::string, ToolHandler> h;

    h["get_user_details"] = guarded([](Environment& env, const json& a) {
        return row(env, "users", a.at("user_id").get<std::string>(), "user");
    });

    h["get_order_details"] = guarded([](Environment& env, const json& a) {
        return row(env, "orders", a.at("order_id").get<std::string>(), "order");
    });

    h["get_product_details"] = guarded([](Environment& env, const json& a) {
        return row(env, "products", a.at("product_id").get<std::string>(), "product");
    });

    h["cancel_pending_order"] = guarded([](Environment& env, const json& a) {
        const auto id = a.at("order_id").get<std::string>();
        json& o = order_in_status(env, id, "pending");
        json& user = row(env, "users", o.at("user_id").get<std::string>(), "user");
        for (const auto& p : o.at("payment_history")) {
            if (p.at("transaction_type") != "payment") continue;
            refund(user, p.at("payment_method_id").get<std::string>(), p.at("amount").get<long long>(), "balance");
            o["payment_history"].push_back({{"transaction_type", "refund"},
                                            {"amount", p.at("amount")},
                                            {"payment_method_id", p.at("payment_method_id")}});
        }
        o["status"] = "cancelled";
        o["cancel_reason"] = a.at("reason");
        return o;
    });

    h["modify_pending_order_address"] = guarded([](Environment& env, const json& a) {
        const auto id = a.at("order_id").get<std::string>();
        json& o = order_in_status(env, id, "pending");
        o["address"] = {{"address1", a.at("address1")}, {"address2", a.at("address2")}, {"city", a.at("city")},
                        {"state", a.at("state")},       {"country", a.at("country")},   {"zip", a.at("zip")}};
        return o;
    });

    h["exchange_delivered_order_items"] = guarded([](Environment& env, const json& a) {
        const auto id = a.at("order_id").get<std::string>();
        json& o = order_in_status(env, id, "delivered");
        json& user = row(env, "users", o.at("user_id").get<std::string>(), "user");
        const json& item_ids = a.at("item_ids");
        const json& new_ids = a.at("new_item_ids");
        if (item_ids.size() != new_ids.size()) fail("item_ids and new_item_ids differ in length");
        auto lines = pick_lines(o, item_ids);
        long long diff = 0;
        for (std::size_t k = 0; k < lines.size(); ++k) {
            const json& line = o.at("items")[lines[k]];
            const json& product = row(env, "products", line.at("product_id").get<std::string>(), "product");
            const auto new_id = new_ids[k].get<std::string>();
            if (!product.at("variants").contains(new_id))
                fail("item '" + new_id + "' is not a variant of the same product");
            const json& variant = product.at("variants").at(new_id);
            if (!variant.value("available", false)) fail("item '" + new_id + "' is not available");
            diff += variant.at("price").get<long long>() - line.at("price").get<long long>();
        }
        const auto pm = a.at("payment_method_id").get<std::string>();
        if (diff > 0) charge(user, pm, diff, "balance");
        else refund(user, pm, -diff, "balance");
        o["status"] = "exchange requested";
        o["exchange_items"] = item_ids;
        o["exchange_new_items"] = new_ids;
        o["exchange_payment_method_id"] = pm;
        o["exchange_price_difference"] = diff;
        return o;
    });

    h["return_delivered_order_items"] = guarded([](Environment& env, const json& a) {
        const auto id = a.at("order_id").get<std::string>();
        json& o = order_in_status(env, id, "delivered");
        json& user = row(env, "users", o.at("user_id").get<std::string>(), "user");
        auto lines = pick_lines(o, a.at("item_ids"));
        long long amount = 0;
        for (auto i : lines) amount += o.at("items")[i].at("price").get<long long>();
        const auto pm = a.at("payment_method_id").get<std::string>();
        refund(user, pm, amount, "balance");
        o["status"] = "return requested";
        o["return_items"] = a.at("item_ids");
        o["return_payment_method_id"] = pm;
        o["payment_history"].push_back(
            {{"transaction_type", "refund"}, {"amount", amount}, {"payment_method_id", pm}});
        return o;
    });

    return h;
}

}  // namespace

std::map<std::string, ToolHandler> domain_handlers(Domain d) {
    auto h = d == Domain::AirlineMini ? airline_handlers() : retail_handlers();
    h[std::string(kThinkTool)] = think_handler();
    h[std::string(kTransferTool)] = transfer_handler();
    h[std::string(kReportTool)] = report_handler();
    return h;
}

}  // namespace rein
