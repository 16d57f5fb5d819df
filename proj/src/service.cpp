#include "cycloop/service.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>

#include <httplib.h>

#include "cycloop/cyclic_solver.hpp"
#include "cycloop/datagen.hpp"
#include "cycloop/error.hpp"
#include "cycloop/interactive.hpp"
#include "cycloop/kernels.hpp"
#include "cycloop/koopman.hpp"

namespace cycloop {

static_assert(std::endian::native == std::endian::little, "frame payloads are written in host order");

namespace {

using nlohmann::json;

// Maps an exception to the HTTP status of the endpoint contract.
struct HttpError : std::runtime_error {
  HttpError(int s, const std::string& what) : std::runtime_error(what), status(s) {}
  int status;
};

Reply error_reply(int status, const std::string& message) {
  return {status, json{{"error", message}, {"status", status}}};
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body);  // parse_error maps to 400 below
  if (!j.is_object()) throw HttpError(400, "request body must be a JSON object");
  return j;
}

// Accepts "NxM" and returns {N, M}.
std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw InvalidArgument("grid must look like NxM, got '" + s + "'");
  try {
    std::size_t used = 0;
    const auto a = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto b = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument(s);
    return {a, b};
  } catch (const std::logic_error&) {
    throw InvalidArgument("grid must look like NxM, got '" + s + "'");
  }
}

struct Session {
  std::string id;
  json create_request;
  std::string dataset;
  FieldLayout layout;
  Vector reference_frame;
  double dt = 1.0;
  std::shared_ptr<const ReducedModel> model;
  std::vector<Vector> baseline_frames;  // T+1 lifted frames
  CyclicMetrics baseline_metrics;
  std::size_t harmonics = 0;
  bool identity_basis = false;
  std::unique_ptr<EditSession> edits;
  json summary;

  std::mutex edit_mutex;  // one writer; edits apply in lock order
  std::vector<json> edit_log;
};

json layout_json(const FieldLayout& layout) {
  json blocks = json::array();
  for (const auto& b : layout.blocks()) {
    blocks.push_back({{"name", b.name}, {"components", b.components}, {"count", b.count}});
  }
  return blocks;
}

std::string default_block(const FieldLayout& layout) {
  if (layout.has_block("positions")) return "positions";
  return layout.blocks().front().name;
}

Trajectory resolve_dataset(const json& req, const std::filesystem::path& model_dir) {
  if (req.contains("trajectory")) {
    const std::string name = req.at("trajectory").get<std::string>();
    const std::filesystem::path rel(name);
    if (name.empty() || rel.has_parent_path() || rel.is_absolute() || name == "." || name == "..") {
      throw InvalidArgument("trajectory must be a plain file name inside the model directory");
    }
    const auto path = model_dir / rel;
    if (!std::filesystem::exists(path)) throw InvalidArgument("trajectory '" + name + "' not found");
    return load_trajectory(path);
  }
  if (!req.contains("dataset")) throw InvalidArgument("request needs \"dataset\" or \"trajectory\"");
  const std::string cls = req.at("dataset").get<std::string>();
  if (cls != "nbody" && cls != "sheet" && cls != "water") {
    throw InvalidArgument("unknown dataset '" + cls + "' (expected nbody, sheet or water)");
  }
  json overrides = req.value("config", json::object());
  if (!overrides.is_object()) throw InvalidArgument("config must be an object");
  if (req.contains("frames")) overrides["frames"] = req.at("frames").get<std::size_t>();
  if (req.contains("grid")) {
    if (cls == "nbody") throw InvalidArgument("grid does not apply to nbody");
    const auto [nx, ny] = parse_grid(req.at("grid").get<std::string>());
    overrides["nx"] = nx;
    overrides["ny"] = ny;
  }
  return generate(cls, overrides, req.value("seed", std::uint64_t{7}));
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  mutable std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::mt19937_64 id_rng{std::random_device{}()};
  std::uint64_t id_counter = 0;

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessions_mutex);
    const auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  std::string next_id() {
    std::unique_lock lock(sessions_mutex);
    std::ostringstream os;
    os << 's' << ++id_counter << '-' << std::hex << (id_rng() & 0xffffffffu);
    return os.str();
  }

  std::shared_ptr<Session> build_session(const json& req, std::string id) {
    const Trajectory traj = resolve_dataset(req, options.model_dir);
    CyclicOptions opt;
    const std::string source = traj.source.empty() ? req.value("dataset", std::string{}) : traj.source;
    opt.rank = req.value("rank", default_rank(source));
    opt.harmonics = req.value("harmonics", std::size_t{8});
    if (req.contains("weights")) {
      const auto& w = req.at("weights");
      opt.weights.fidelity = w.value("w_red", opt.weights.fidelity);
      opt.weights.control = w.value("w_u", opt.weights.control);
    }
    opt.energy = control_energy_from_string(req.value("control_energy", std::string("gram")));
    const std::string mode = req.value("edit_basis", std::string("local"));
    if (mode != "local" && mode != "identity") {
      throw InvalidArgument("edit_basis must be \"local\" or \"identity\"");
    }

    CyclicSolution base = solve_cyclic(traj, opt);  // NumericalError maps to 422

    auto s = std::make_shared<Session>();
    s->id = std::move(id);
    s->create_request = req;
    s->dataset = source;
    s->layout = traj.layout;
    s->reference_frame = traj.frames.front();
    s->dt = traj.dt;
    s->model = base.model;
    s->baseline_frames = std::move(base.full_cycle.frames);
    s->baseline_metrics = base.metrics;
    s->harmonics = opt.harmonics;
    s->identity_basis = mode == "identity";

    const std::size_t period = base.period;
    Matrix observed = project_frames(*s->model, traj, period);
    FourierBasis basis(period, opt.harmonics, opt.include_constant);
    LocalBasisSet bases = s->identity_basis ? LocalBasisSet::identity(s->model->rank())
                                            : LocalBasisSet(s->model->rank());
    s->edits = std::make_unique<EditSession>(s->model, std::move(observed), std::move(basis),
                                             std::move(bases), /*lift_frames=*/true);

    s->summary = {{"dataset", source},
                  {"n", traj.state_dim()},
                  {"frames", traj.frame_count()},
                  {"period", period},
                  {"r", s->model->rank()},
                  {"m", 2 * opt.harmonics},
                  {"harmonics", opt.harmonics},
                  {"dt", traj.dt},
                  {"layout", layout_json(traj.layout)},
                  {"default_block", default_block(traj.layout)},
                  {"edit_basis", mode},
                  {"control_energy", to_string(opt.energy)},
                  {"weights", {{"w_red", opt.weights.fidelity}, {"w_u", opt.weights.control}}},
                  {"model_version", s->edits->model_version()},
                  {"metrics", metrics_to_json(base.metrics)}};
    return s;
  }

  Reply create(const json& req, std::optional<std::string> fixed_id = std::nullopt) {
    std::string id = fixed_id ? *fixed_id : next_id();
    auto s = build_session(req, id);
    json summary = s->summary;
    summary["version"] = 0;
    {
      std::unique_lock lock(sessions_mutex);
      sessions[id] = std::move(s);
    }
    return {200, {{"session_id", id}, {"summary", summary}}};
  }

  Reply edit(Session& s, const json& req) {
    std::lock_guard lock(s.edit_mutex);
    const std::size_t period = s.edits->basis().period();

    // Everything that can be rejected is checked before a basis column is added.
    EditRequest er;
    er.target_frame = req.value("frame", std::size_t{1});
    if (er.target_frame < 1 || er.target_frame > period) {
      throw InvalidArgument("frame must be in 1.." + std::to_string(period));
    }
    if (req.contains("width")) er.width = req.at("width").get<double>();
    er.strength = req.value("strength", 0.0);
    if (req.contains("weights")) {
      const auto& w = req.at("weights");
      er.weights.fidelity = w.value("w_red", er.weights.fidelity);
      er.weights.control = w.value("w_u", er.weights.control);
      er.weights.profile = w.value("w_profile", er.weights.profile);
    }
    if (req.contains("model_version")) er.model_version = req.at("model_version").get<std::uint64_t>();
    er.weights.validate();

    std::size_t selected = 0;
    double projection_norm = 1.0;
    if (s.identity_basis) {
      if (!req.contains("component")) throw InvalidArgument("identity-basis sessions take \"component\"");
      selected = req.at("component").get<std::size_t>();
      if (selected >= s.model->rank()) throw InvalidArgument("component out of range");
    } else {
      if (!req.contains("region")) throw InvalidArgument("edit needs a \"region\"");
      const Region region = region_from_json(req.at("region"));
      const std::string block = req.value("block", default_block(s.layout));
      if (!s.layout.has_block(block)) throw InvalidArgument("unknown block '" + block + "'");
      const auto& fb = s.layout.block(block);
      for (std::size_t e : region.indices) {
        if (e >= fb.count) throw InvalidArgument("region index " + std::to_string(e) + " out of range");
      }
      const auto elements = resolve_region(region, s.layout, s.reference_frame);
      if (elements.empty()) throw HttpError(422, "region selects no elements");
      if (!req.contains("direction")) throw InvalidArgument("edit needs a \"direction\"");
      const Vector direction = req.at("direction").get<Vector>();
      LocalBasisColumn col = build_local_basis(*s.model, s.layout, elements, block, direction);
      projection_norm = col.projection_norm;
      selected = s.edits->add_basis(std::move(col));
    }

    er.selected = selected;

    const auto sol = s.edits->apply(er);
    s.edit_log.push_back(req);
    return {200,
            {{"version", sol->version},
             {"metrics", edit_metrics_to_json(sol->metrics)},
             {"selected", selected},
             {"basis_count", s.edits->basis_count()},
             {"projection_norm", projection_norm}}};
  }


  Reply frames(const Session& s, const httplib::Request& req, std::string& payload) const {
    std::size_t stride = 1;
    if (req.has_param("stride")) {
      try {
        stride = std::stoul(req.get_param_value("stride"));
      } catch (const std::logic_error&) {
        throw InvalidArgument("stride must be a positive integer");
      }
      if (stride == 0) throw InvalidArgument("stride must be a positive integer");
    }
    std::string block = req.has_param("block") ? req.get_param_value("block") : default_block(s.layout);
    std::size_t offset = 0, width = s.layout.state_dim(), components = 1, count = width;
    if (block != "all") {
      if (!s.layout.has_block(block)) throw InvalidArgument("unknown block '" + block + "'");
      const auto& fb = s.layout.block(block);
      offset = s.layout.offset(block);
      width = fb.size();
      components = fb.components;
      count = fb.count;
    }

    // Immutable snapshot of the latest solution.
    const auto latest = s.edits->latest();
    const std::uint64_t version = latest ? latest->version : 0;
    if (req.has_param("version")) {
      std::uint64_t wanted = 0;
      try {
        wanted = std::stoull(req.get_param_value("version"));
      } catch (const std::logic_error&) {
        throw InvalidArgument("version must be an integer");
      }
      if (wanted != version) {
        throw HttpError(409, "session is at version " + std::to_string(version) + ", requested " +
                                 std::to_string(wanted));
      }
    }
    const std::vector<Vector>& cycle = latest ? latest->full_cycle : s.baseline_frames;
    const std::size_t period = s.edits->basis().period();
    if (cycle.size() < period) throw NumericalError("session holds no lifted frames");

    std::vector<std::size_t> picks;
    for (std::size_t t = 0; t < period; t += stride) picks.push_back(t);
    // closed=1 appends frame T+1, which equals the first frame of the loop
    if (req.has_param("closed") && req.get_param_value("closed") != "0" && cycle.size() > period) {
      picks.push_back(period);
    }

    json header = {{"n_block", width},     {"frames", picks.size()}, {"version", version},
                   {"block", block},       {"components", components}, {"count", count},
                   {"stride", stride},     {"period", period},       {"dt", s.dt * static_cast<double>(stride)},
                   {"dtype", "float32"},   {"endian", "little"}};
    std::string head = header.dump();
    head.push_back('\n');
    payload.resize(head.size() + picks.size() * width * sizeof(float));
    std::copy(head.begin(), head.end(), payload.begin());
    std::vector<float> buf(width);
    const auto& k = kernels::active();
    char* out = payload.data() + head.size();
    for (std::size_t t : picks) {
      k.to_f32(cycle[t].data() + offset, buf.data(), width);
      std::memcpy(out, buf.data(), width * sizeof(float));
      out += width * sizeof(float);
    }
    return {200, header};
  }

  void snapshot_all() const {
    if (!options.snapshot_dir) return;
    std::filesystem::create_directories(*options.snapshot_dir);
    std::shared_lock lock(sessions_mutex);
    for (const auto& [id, s] : sessions) {
      std::lock_guard elock(s->edit_mutex);
      json snap = {{"session_id", id}, {"create", s->create_request}, {"edits", s->edit_log}};
      std::ofstream out(*options.snapshot_dir / (id + ".json"));
      out << snap.dump(1) << '\n';
    }
  }

  void restore() {
    if (!options.snapshot_dir || !std::filesystem::is_directory(*options.snapshot_dir)) return;
    for (const auto& entry : std::filesystem::directory_iterator(*options.snapshot_dir)) {
      if (entry.path().extension() != ".json") continue;
      try {
        std::ifstream in(entry.path());
        const json snap = json::parse(in);
        const std::string id = snap.at("session_id").get<std::string>();
        create(snap.at("create"), id);
        auto s = find(id);
        for (const auto& e : snap.at("edits")) edit(*s, e);
      } catch (const std::exception& e) {
        std::cerr << "cycloop: skipping snapshot " << entry.path() << ": " << e.what() << '\n';
      }
    }
  }
};

namespace {

template <typename F>
Reply guarded(F&& f) {
  try {
    return f();
  } catch (const HttpError& e) {
    return error_reply(e.status, e.what());
  } catch (const json::exception& e) {
    return error_reply(400, std::string("bad request: ") + e.what());
  } catch (const StaleModelError& e) {
    return error_reply(409, e.what());
  } catch (const DegenerateProjection& e) {
    return error_reply(422, e.what());
  } catch (const NumericalError& e) {
    return error_reply(422, e.what());
  } catch (const Error& e) {
    return error_reply(400, e.what());
  }
}

void send(httplib::Response& res, const Reply& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  auto& svr = impl_->server;
  Impl* self = impl_.get();
  const std::size_t threads = std::max<std::size_t>(1, impl_->options.threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, what));
  });

  svr.Get("/health", [self](const httplib::Request&, httplib::Response& res) {
    json body = {{"status", "ok"}, {"kernels", std::string(kernels::active().name)}};
    {
      std::shared_lock lock(self->sessions_mutex);
      body["sessions"] = self->sessions.size();
    }
    send(res, {200, body});
  });

  svr.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });

  svr.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, summary(req.matches[1]));
  });

  svr.Delete(R"(/sessions/([^/]+))", [self](const httplib::Request& req, httplib::Response& res) {
    std::unique_lock lock(self->sessions_mutex);
    const bool erased = self->sessions.erase(req.matches[1]) > 0;
    send(res, erased ? Reply{200, {{"deleted", std::string(req.matches[1])}}}
                     : error_reply(404, "unknown session"));
  });

  svr.Post(R"(/sessions/([^/]+)/edits)", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, apply_edit(req.matches[1], req.body));
  });

  svr.Get(R"(/sessions/([^/]+)/frames)", [self](const httplib::Request& req, httplib::Response& res) {
    auto s = self->find(req.matches[1]);
    if (!s) return send(res, error_reply(404, "unknown session"));
    std::string payload;
    const Reply r = guarded([&] { return self->frames(*s, req, payload); });
    if (r.status != 200) return send(res, r);
    res.status = 200;
    res.set_content(std::move(payload), "application/octet-stream");
  });

  impl_->restore();
}

Service::~Service() {
  stop();
  try {
    impl_->snapshot_all();
  } catch (const std::exception& e) {
    std::cerr << "cycloop: snapshot failed: " << e.what() << '\n';
  }
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::run() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

Reply Service::create_session(const std::string& body) {
  return guarded([&] { return impl_->create(parse_body(body)); });
}

Reply Service::apply_edit(const std::string& session_id, const std::string& body) {
  auto s = impl_->find(session_id);
  if (!s) return error_reply(404, "unknown session");
  return guarded([&] { return impl_->edit(*s, parse_body(body)); });
}

Reply Service::summary(const std::string& session_id) const {
  auto s = impl_->find(session_id);
  if (!s) return error_reply(404, "unknown session");
  const auto latest = s->edits->latest();
  json body = s->summary;
  body["session_id"] = session_id;
  body["version"] = latest ? latest->version : 0;
  if (latest) body["edit_metrics"] = edit_metrics_to_json(latest->metrics);
  return {200, body};
}

std::size_t Service::session_count() const {
  std::shared_lock lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

void Service::write_snapshots() const { impl_->snapshot_all(); }

}  // namespace cycloop
