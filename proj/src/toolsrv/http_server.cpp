// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/toolsrv/http_server.hpp"

#include "httplib.h"
#include "json.hpp"

namespace raw2raw::tools {

using nlohmann::json;

namespace {

json patch_json(const Patch &p)
{
    return {{"x", p.x}, {"y", p.y}, {"size", p.size}};
}

Patch patch_from(const json &j)
{
    auto integer = [&](const char *k) {
        const auto &v = j.at(k);
        if (!v.is_number_integer())
            throw ServiceError(400, std::string("patch field '") + k + "' must be an integer");
        return v.get<int>();
    };
    return {integer("x"), integer("y"), integer("size")};
}

std::vector<LabeledPatch> chart_from(const json &arr)
{
    if (!arr.is_array())
        throw ServiceError(400, "chart lists must be arrays");
    std::vector<LabeledPatch> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.push_back({patch_from(arr[i]), arr[i].value("label", "P" + std::to_string(i + 1))});
    return out;
}

json fit_json(const FitSummary &f)
{
    json j{{"residual_rms", nullptr}, {"out_of_gamut_fraction", f.out_of_gamut_fraction}, {"n_samples", f.n_samples}};
    if (f.residual_rms)
        j["residual_rms"] = *f.residual_rms;
    if (!f.diagnostic.empty())
        j["diagnostic"] = f.diagnostic;
    return j;
}

json mutation_json(const MutationResult &m)
{
    json j{{"record", json::parse(m.record.to_json())}, {"fit", fit_json(m.fit)}};
    if (!m.homogeneity.empty()) {
        json h = json::array();
        for (const auto &r : m.homogeneity)
            h.push_back({{"pass", r.pass}, {"cv", r.cv}});
        j["homogeneity"] = h;
    }
    return j;
}

void send_json(httplib::Response &res, const json &j, int status = 200)
{
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

int status_for(const Error &e)
{
    switch (e.code()) {
    case ErrorCode::Io: return 404;
    case ErrorCode::Bounds:
    case ErrorCode::Metadata:
    case ErrorCode::Config:
    case ErrorCode::Shape: return 400;
    case ErrorCode::SingularFit: return 422;
    default: return 500;
    }
}

template <typename F>
httplib::Server::Handler guarded(F &&f)
{
    return [f = std::forward<F>(f)](const httplib::Request &req, httplib::Response &res) {
        try {
            f(req, res);
        } catch (const ServiceError &e) {
            send_json(res, {{"error", e.what()}}, e.status());
        } catch (const Error &e) {
            send_json(res, {{"error", e.what()}}, status_for(e));
        } catch (const json::exception &e) {
            send_json(res, {{"error", std::string("invalid request body: ") + e.what()}}, 400);
        } catch (const std::exception &e) {
            send_json(res, {{"error", e.what()}}, 500);
        }
    };
}

json parse_body(const httplib::Request &req)
{
    json j = json::parse(req.body);
    if (!j.is_object())
        throw ServiceError(400, "request body must be a JSON object");
    return j;
}

} // namespace

struct AnnotationServer::Impl
{
    AnnotationService &svc;
    httplib::Server http;

    explicit Impl(AnnotationService &s) : svc(s) { routes(); }

    json pair_summary(const PairInfo &p)
    {
        const AnnotationRecord r = svc.record(p.id);
        return {{"id", p.id},
                {"split", p.split},
                {"status", r.status == AnnotationStatus::Committed ? "COMMITTED" : "DRAFT"},
                {"n_chart", r.chart_a.size()},
                {"n_regions", r.regions.size()}};
    }

    void routes()
    {
        http.Get("/pairs", guarded([this](const httplib::Request &, httplib::Response &res) {
                     json arr = json::array();
                     for (const auto &p : svc.pairs())
                         arr.push_back(pair_summary(p));
                     send_json(res, arr);
                 }));
        http.Get(R"(/pairs/([A-Za-z0-9_\-]+))", guarded([this](const httplib::Request &req, httplib::Response &res) {
                     const std::string id = req.matches[1];
                     if (!svc.layout().has_pair(id))
                         throw ServiceError(404, "no pair '" + id + "'");
                     const PairInfo p = svc.layout().pair(id);
                     json j = pair_summary(p);
                     json imgs = json::object();
                     for (const auto &im : svc.images(id))
                         imgs[im.id.substr(im.id.rfind('.') + 1)] = {
                             {"id", im.id}, {"width", im.width}, {"height", im.height},
                             {"preview", "/images/" + im.id + "/preview"}};
                     j["images"] = imgs;
                     json flat = json::array();
                     for (const auto &r : p.flat_regions)
                         flat.push_back(patch_json(r));
                     j["flat_regions"] = flat;
                     j["record"] = json::parse(svc.record(id).to_json());
                     j["fit"] = fit_json(svc.fit(id));
                     send_json(res, j);
                 }));
        http.Get(R"(/images/([A-Za-z0-9_\-\.]+)/preview)",
                 guarded([this](const httplib::Request &req, httplib::Response &res) {
                     const auto png = svc.preview_png(req.matches[1]);
                     res.set_content(std::string(png.begin(), png.end()), "image/png");
                 }));
        http.Post(R"(/pairs/([A-Za-z0-9_\-]+)/chart)",
                  guarded([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parse_body(req);
                      auto a = chart_from(body.at("chart_a"));
                      auto b = body.contains("chart_b") ? chart_from(body.at("chart_b")) : a;
                      send_json(res, mutation_json(svc.set_chart(req.matches[1], std::move(a), std::move(b))));
                  }));
        http.Post(R"(/pairs/([A-Za-z0-9_\-]+)/regions)",
                  guarded([this](const httplib::Request &req, httplib::Response &res) {
                      const json body = parse_body(req);
                      const RegionCorrespondence r{patch_from(body.at("patch_a")), patch_from(body.at("patch_b"))};
                      send_json(res, mutation_json(svc.add_region(req.matches[1], r)));
                  }));
        http.Delete(R"(/pairs/([A-Za-z0-9_\-]+)/regions/(\d+))",
                    guarded([this](const httplib::Request &req, httplib::Response &res) {
                        const std::size_t idx = std::stoul(req.matches[2]);
                        send_json(res, mutation_json(svc.delete_region(req.matches[1], idx)));
                    }));
        http.Post(R"(/pairs/([A-Za-z0-9_\-]+)/commit)",
                  guarded([this](const httplib::Request &req, httplib::Response &res) {
                      send_json(res, mutation_json(svc.commit(req.matches[1])));
                  }));
        http.Get(R"(/pairs/([A-Za-z0-9_\-]+)/fit)",
                 guarded([this](const httplib::Request &req, httplib::Response &res) {
                     send_json(res, fit_json(svc.fit(std::string(req.matches[1]))));
                 }));
        http.set_error_handler([](const httplib::Request &, httplib::Response &res) {
            if (res.body.empty())
                send_json(res, {{"error", "not found"}}, res.status);
        });
    }
};

AnnotationServer::AnnotationServer(AnnotationService &service) : impl_(std::make_unique<Impl>(service)) {}

AnnotationServer::~AnnotationServer() = default;

int AnnotationServer::bind(const std::string &host, int port)
{
    if (port == 0)
        return impl_->http.bind_to_any_port(host);
    return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool AnnotationServer::serve()
{
    return impl_->http.listen_after_bind();
}

void AnnotationServer::stop()
{
    impl_->http.stop();
}

} // namespace raw2raw::tools
