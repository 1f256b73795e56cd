#include "mas/executor.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>

#include "mas/util.hpp"

namespace mas {

std::string compose_subtask(const std::string& original, const std::string& sub_input) {
    if (sub_input.empty()) return original;
    return "Original task: " + original + "; Current Sub-task: " + sub_input;
}

std::string substitute_placeholders(const std::string& text, const std::map<std::string, std::string>& results,
                                    bool strict, std::vector<std::string>* unresolved) {
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto open = text.find("${", pos);
        if (open == std::string::npos) break;
        auto close = text.find('}', open + 2);
        if (close == std::string::npos) break;
        std::string id = text.substr(open + 2, close - open - 2);
        out.append(text, pos, open - pos);
        auto it = results.find(id);
        if (it != results.end()) {
            out += it->second;
        } else {
            if (strict) throw UnresolvedPlaceholder(id);
            if (unresolved) unresolved->push_back(id);
            out.append(text, open, close + 1 - open);
        }
        pos = close + 1;
    }
    out.append(text, pos, std::string::npos);
    return out;
}

std::string_view to_string(TraceStatus s) {
    switch (s) {
        case TraceStatus::Ok: return "Ok";
        case TraceStatus::ParseError: return "ParseError";
        case TraceStatus::ValidationError: return "ValidationError";
        case TraceStatus::BackendError: return "BackendError";
        case TraceStatus::Incomplete: return "Incomplete";
    }
    return "Unknown";
}

TraceStatus trace_status_from_string(std::string_view s) {
    for (auto st : {TraceStatus::Ok, TraceStatus::ParseError, TraceStatus::ValidationError, TraceStatus::BackendError,
                    TraceStatus::Incomplete}) {
        if (to_string(st) == s) return st;
    }
    throw std::invalid_argument("unknown trace status: " + std::string(s));
}

bool NodeResult::same_outcome(const NodeResult& o) const {
    return agent_id == o.agent_id && agent_name == o.agent_name && input_text == o.input_text &&
           thinking == o.thinking && answer == o.answer && calls_made == o.calls_made && retrievals == o.retrievals &&
           ledger.llm_calls == o.ledger.llm_calls && ledger.prompt_tokens == o.ledger.prompt_tokens &&
           ledger.completion_tokens == o.ledger.completion_tokens && incomplete == o.incomplete && error == o.error;
}

namespace {

std::int64_t micros_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
}

struct BackendScope {
    std::unique_ptr<CallLimiter> own;
    CallLimiter* limiter;
    LimitedBackend backend;

    BackendScope(ChatBackend& inner, const ExecConfig& cfg)
        : own(cfg.limiter ? nullptr : std::make_unique<CallLimiter>(std::max<std::size_t>(1, cfg.concurrency_limit))),
          limiter(cfg.limiter ? cfg.limiter : own.get()),
          backend(inner, *limiter) {}
};

// Runs one agent and fills the node record; failures are captured, not thrown.
void run_node(NodeResult& node, const AgentSpec& spec, ChatBackend& backend, const ExecConfig& cfg) {
    AgentContext ctx{backend, cfg.retriever, cfg.prices, cfg.agent};
    try {
        auto ans = run_agent(spec, node.input_text, ctx);
        node.thinking = ans.thinking;
        node.answer = ans.answer;
        node.calls_made = ans.calls_made;
        node.retrievals = ans.retrievals;
        node.ledger = ans.ledger;
        node.incomplete = ans.incomplete;
    } catch (const AgentCallError& e) {
        node.error = e.what();
        node.calls_made = e.calls_made();
        node.ledger = e.partial_ledger();
    } catch (const std::exception& e) {
        node.error = e.what();
    } catch (...) {
        node.error = "unknown failure";
    }
}

void finish_status(ExecutionTrace& trace) {
    for (const auto& n : trace.node_results) {
        trace.ledger += n.ledger;
    }
    for (const auto& n : trace.node_results) {
        if (!n.error.empty()) {
            trace.status = TraceStatus::BackendError;
            if (trace.error.empty()) trace.error = n.agent_id + ": " + n.error;
        }
    }
    if (trace.status == TraceStatus::Ok) {
        for (const auto& n : trace.node_results) {
            if (n.incomplete) trace.status = TraceStatus::Incomplete;
        }
    }
}

}  // namespace

ExecutionTrace execute(const LowDomDecision& decision, const std::string& task, ChatBackend& backend,
                       const ExecConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ExecutionTrace trace;
    trace.dom = DomLevel::Low;
    trace.plan = plan_to_json(decision);
    if (const auto* direct = std::get_if<DirectAnswer>(&decision.value)) {
        trace.final_answer = direct->text;
        trace.stats = GraphStats{0, 0, 0};
        trace.elapsed_us = micros_since(t0);
        return trace;
    }
    const auto& single = std::get<SingleDelegation>(decision.value);
    BackendScope scope(backend, cfg);
    NodeResult node;
    node.agent_id = !single.agent.agent_id.empty() ? single.agent.agent_id
                                                   : single.agent.output_id.value_or("agent");
    node.agent_name = std::string(agent_name(single.agent.kind));
    node.input_text = compose_subtask(task, single.agent.agent_input);
    node.start_seq = 1;
    run_node(node, single.agent, scope.backend, cfg);
    node.end_seq = 2;
    trace.stats = GraphStats{1, 1, 0};
    auto ref = trim(single.answer_ref);
    if (ref.empty() || (single.agent.output_id && ref == trim(*single.agent.output_id))) {
        trace.final_answer = node.answer;
    } else {
        trace.final_answer = single.answer_ref;
    }
    trace.node_results.push_back(std::move(node));
    finish_status(trace);
    if (trace.status == TraceStatus::BackendError) trace.final_answer.clear();
    trace.elapsed_us = micros_since(t0);
    return trace;
}

ExecutionTrace execute(const OrchestrationGraph& graph, const std::string& task, ChatBackend& backend,
                       const ExecConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ExecutionTrace trace;
    trace.dom = DomLevel::High;
    trace.plan = graph_to_json(graph);
    trace.stats = graph_stats(graph);
    for (const auto& w : graph.dataflow_warnings()) {
        trace.warnings.push_back(w.kind == DataflowViolation::Kind::MissingEdge
                                     ? "dataflow: " + w.to + " references ${" + w.from + "} without an edge"
                                     : "dataflow: edge " + w.from + " -> " + w.to + " has no ${" + w.from + "} reference");
    }
    if (graph.duplicate_edges() > 0) {
        trace.warnings.push_back("duplicate edges dropped: " + std::to_string(graph.duplicate_edges()));
    }
    BackendScope scope(backend, cfg);
    const bool strict = cfg.dataflow == DataflowMode::Strict;

    const auto& order = graph.topo_order();
    std::map<std::string, std::set<std::string>> ancestors;
    for (const auto& id : order) {
        auto& a = ancestors[id];
        for (const auto& p : graph.predecessors(id)) {
            a.insert(p);
            a.insert(ancestors[p].begin(), ancestors[p].end());
        }
    }

    std::mutex mu;
    std::condition_variable cv;
    std::map<std::string, NodeResult> done;
    std::map<std::string, std::string> answers;
    std::map<std::string, std::size_t> waiting;
    std::deque<std::string> ready;
    std::uint64_t seq = 0;
    std::size_t running = 0;
    bool failed = false;
    std::vector<std::thread> workers;

    for (const auto& id : order) {
        waiting[id] = graph.predecessors(id).size();
        if (waiting[id] == 0) ready.push_back(id);
    }

    // Called with `mu` held.
    auto prepare = [&](const std::string& id) {
        NodeResult node;
        const auto& spec = graph.node(id);
        node.agent_id = id;
        node.agent_name = std::string(agent_name(spec.kind));
        std::map<std::string, std::string> visible;
        for (const auto& a : ancestors[id]) visible[a] = answers.at(a);
        std::vector<std::string> unresolved;
        try {
            node.input_text = compose_subtask(task, substitute_placeholders(spec.agent_input, visible, strict, &unresolved));
        } catch (const UnresolvedPlaceholder& e) {
            node.error = e.what();
        }
        for (const auto& u : unresolved) trace.warnings.push_back(id + ": unresolved placeholder ${" + u + "}");
        node.start_seq = ++seq;
        return node;
    };
    // Called with `mu` held.
    auto commit = [&](NodeResult node) {
        node.end_seq = ++seq;
        const std::string id = node.agent_id;
        if (!node.error.empty()) failed = true;
        answers[id] = node.answer;
        for (const auto& s : graph.successors(id)) {
            if (--waiting[s] == 0) ready.push_back(s);
        }
        done.emplace(id, std::move(node));
    };

    {
        std::unique_lock lock(mu);
        for (;;) {
            while (!ready.empty() && !failed) {
                auto id = ready.front();
                ready.pop_front();
                auto node = prepare(id);
                if (!node.error.empty()) {
                    commit(std::move(node));
                    continue;
                }
                if (!cfg.parallel) {
                    lock.unlock();
                    run_node(node, graph.node(id), scope.backend, cfg);
                    lock.lock();
                    commit(std::move(node));
                    continue;
                }
                ++running;
                workers.emplace_back([&, id, node = std::move(node)]() mutable {
                    run_node(node, graph.node(id), scope.backend, cfg);
                    std::lock_guard guard(mu);
                    commit(std::move(node));
                    --running;
                    cv.notify_all();
                });
            }
            if (running == 0) break;
            cv.wait(lock);
        }
    }
    for (auto& w : workers) w.join();

    for (const auto& id : order) {
        auto it = done.find(id);
        if (it != done.end()) trace.node_results.push_back(std::move(it->second));
    }
    finish_status(trace);
    if (trace.status == TraceStatus::Ok || trace.status == TraceStatus::Incomplete) {
        trace.final_answer = answers.at(graph.sink_id());
    } else if (failed && trace.node_results.size() < order.size()) {
        trace.warnings.push_back("cancelled " + std::to_string(order.size() - trace.node_results.size()) +
                                 " node(s) after failure");
    }
    trace.elapsed_us = micros_since(t0);
    return trace;
}

ExecutionTrace execute(const HighDomPlan& plan, const std::string& task, ChatBackend& backend, const ExecConfig& cfg) {
    if (const auto* direct = std::get_if<DirectAnswer>(&plan.value)) {
        ExecutionTrace trace;
        trace.dom = DomLevel::High;
        trace.plan = plan_to_json(plan);
        trace.final_answer = direct->text;
        trace.stats = GraphStats{0, 0, 0};
        return trace;
    }
    const auto& g = std::get<AgentGraphPlan>(plan.value);
    auto graph = validate(g, cfg.dataflow);
    auto trace = execute(graph, task, backend, cfg);
    if (g.ignored_answer) {
        trace.plan["ignored_answer"] = *g.ignored_answer;
        trace.warnings.push_back("answer channel ignored in favour of the sink output");
    }
    return trace;
}

ExecutionTrace run_orchestration(const std::string& orchestration_text, DomLevel dom, const std::string& task,
                                 const std::string& task_id, ChatBackend& backend, const ExecConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ExecutionTrace trace;
    auto fail = [&](TraceStatus status, const std::string& what) {
        trace.status = status;
        trace.error = what;
    };
    try {
        if (dom == DomLevel::Low) {
            std::optional<LowDomDecision> decision;
            try {
                decision = parse_low_dom(orchestration_text);
            } catch (const ProtocolError& e) {
                fail(TraceStatus::ParseError, e.what());
            }
            if (decision) trace = execute(*decision, task, backend, cfg);
        } else {
            std::optional<HighDomPlan> plan;
            try {
                plan = parse_high_dom(orchestration_text);
            } catch (const ProtocolError& e) {
                fail(TraceStatus::ParseError, e.what());
            }
            if (plan) {
                if (auto* g = std::get_if<AgentGraphPlan>(&plan->value)) {
                    trace.plan = plan_to_json(*plan);
                    std::optional<OrchestrationGraph> graph;
                    try {
                        graph = validate(*g, cfg.dataflow);
                    } catch (const GraphError& e) {
                        fail(TraceStatus::ValidationError, e.what());
                    }
                    if (graph) {
                        trace = execute(*graph, task, backend, cfg);
                        if (g->ignored_answer) {
                            trace.plan["ignored_answer"] = *g->ignored_answer;
                            trace.warnings.push_back("answer channel ignored in favour of the sink output");
                        }
                    }
                } else {
                    trace = execute(*plan, task, backend, cfg);
                }
            }
        }
    } catch (const std::exception& e) {
        fail(TraceStatus::BackendError, e.what());
    }
    trace.dom = dom;
    trace.task_id = task_id;
    trace.orchestration_text = orchestration_text;
    trace.elapsed_us = micros_since(t0);
    return trace;
}

nlohmann::json agent_spec_to_json(const AgentSpec& spec) {
    nlohmann::json j{{"agent_id", spec.agent_id},
                     {"agent_name", std::string(agent_name(spec.kind))},
                     {"description", spec.description},
                     {"agent_input", spec.agent_input}};
    if (spec.debate_roles) j["debate_roles"] = *spec.debate_roles;
    if (spec.output_id) j["output_id"] = *spec.output_id;
    if (spec.roles_normalized) j["roles_normalized"] = true;
    return j;
}

nlohmann::json plan_to_json(const LowDomDecision& decision) {
    if (const auto* d = std::get_if<DirectAnswer>(&decision.value)) {
        return {{"dom", "low"}, {"kind", "direct"}, {"answer", d->text}};
    }
    const auto& s = std::get<SingleDelegation>(decision.value);
    return {{"dom", "low"}, {"kind", "delegation"}, {"agent", agent_spec_to_json(s.agent)}, {"answer_ref", s.answer_ref}};
}

nlohmann::json plan_to_json(const HighDomPlan& plan) {
    if (const auto* d = std::get_if<DirectAnswer>(&plan.value)) {
        return {{"dom", "high"}, {"kind", "direct"}, {"answer", d->text}};
    }
    const auto& g = std::get<AgentGraphPlan>(plan.value);
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : g.agents) agents.push_back(agent_spec_to_json(a));
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges) edges.push_back({e.from, e.to});
    nlohmann::json j{{"dom", "high"}, {"kind", "graph"}, {"agents", agents}, {"edges", edges}};
    if (g.ignored_answer) j["ignored_answer"] = *g.ignored_answer;
    return j;
}

nlohmann::json graph_to_json(const OrchestrationGraph& graph) {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : graph.nodes()) agents.push_back(agent_spec_to_json(a));
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : graph.edges()) edges.push_back({e.from, e.to});
    return {{"dom", "high"},
            {"kind", "graph"},
            {"agents", agents},
            {"edges", edges},
            {"topo_order", graph.topo_order()},
            {"sink", graph.sink_id()},
            {"duplicate_edges", graph.duplicate_edges()},
            {"stats", graph_stats(graph)}};
}

void to_json(nlohmann::json& j, const GraphStats& s) {
    j = {{"num_agents", s.num_agents}, {"sequential_length", s.sequential_length}, {"parallel_width", s.parallel_width}};
}

void from_json(const nlohmann::json& j, GraphStats& s) {
    j.at("num_agents").get_to(s.num_agents);
    j.at("sequential_length").get_to(s.sequential_length);
    j.at("parallel_width").get_to(s.parallel_width);
}

void to_json(nlohmann::json& j, const NodeResult& n) {
    j = {{"agent_id", n.agent_id},   {"agent_name", n.agent_name}, {"input_text", n.input_text},
         {"thinking", n.thinking},   {"answer", n.answer},         {"calls_made", n.calls_made},
         {"retrievals", n.retrievals}, {"ledger", n.ledger},       {"incomplete", n.incomplete},
         {"start_seq", n.start_seq}, {"end_seq", n.end_seq}};
    if (!n.error.empty()) j["error"] = n.error;
}

void from_json(const nlohmann::json& j, NodeResult& n) {
    j.at("agent_id").get_to(n.agent_id);
    n.agent_name = j.value("agent_name", "");
    n.input_text = j.value("input_text", "");
    n.thinking = j.value("thinking", "");
    n.answer = j.value("answer", "");
    n.calls_made = j.value("calls_made", std::size_t{0});
    n.retrievals = j.value("retrievals", std::size_t{0});
    if (j.contains("ledger")) j["ledger"].get_to(n.ledger);
    n.incomplete = j.value("incomplete", false);
    n.error = j.value("error", "");
    n.start_seq = j.value("start_seq", std::uint64_t{0});
    n.end_seq = j.value("end_seq", std::uint64_t{0});
}

void to_json(nlohmann::json& j, const TraceScore& s) {
    j = {{"gold", s.gold},         {"predictions", s.predictions}, {"per_answer", s.per_answer},
         {"judged", s.judged},     {"overall", s.overall},         {"reward", s.reward},
         {"failure", s.failure}};
    if (s.axis) j["axis"] = *s.axis;
    if (s.axis_value) j["axis_value"] = *s.axis_value;
}

void from_json(const nlohmann::json& j, TraceScore& s) {
    s.gold = j.value("gold", std::vector<std::string>{});
    s.predictions = j.value("predictions", std::vector<std::string>{});
    s.per_answer = j.value("per_answer", std::vector<bool>{});
    s.judged = j.value("judged", true);
    s.overall = j.value("overall", false);
    s.reward = j.value("reward", 0.0);
    s.failure = j.value("failure", "");
    if (j.contains("axis")) s.axis = j["axis"].get<std::string>();
    if (j.contains("axis_value")) s.axis_value = j["axis_value"].get<int>();
}

void to_json(nlohmann::json& j, const ExecutionTrace& t) {
    j = {{"task_id", t.task_id},
         {"dom", std::string(to_string(t.dom))},
         {"sample_index", t.sample_index},
         {"orchestration_text", t.orchestration_text},
         {"plan", t.plan},
         {"node_results", t.node_results},
         {"final_answer", t.final_answer},
         {"ledger", t.ledger},
         {"status", std::string(to_string(t.status))},
         {"elapsed_us", t.elapsed_us}};
    j["stats"] = t.stats ? nlohmann::json(*t.stats) : nlohmann::json(nullptr);
    if (!t.error.empty()) j["error"] = t.error;
    if (!t.warnings.empty()) j["warnings"] = t.warnings;
    if (t.score) j["score"] = *t.score;
}

void from_json(const nlohmann::json& j, ExecutionTrace& t) {
    j.at("task_id").get_to(t.task_id);
    t.dom = dom_level_from_string(j.value("dom", "high")).value_or(DomLevel::High);
    t.sample_index = j.value("sample_index", 0);
    t.orchestration_text = j.value("orchestration_text", "");
    t.plan = j.value("plan", nlohmann::json(nullptr));
    t.node_results = j.value("node_results", std::vector<NodeResult>{});
    t.final_answer = j.value("final_answer", "");
    if (j.contains("ledger")) j["ledger"].get_to(t.ledger);
    t.status = trace_status_from_string(j.value("status", "Ok"));
    t.elapsed_us = j.value("elapsed_us", std::int64_t{0});
    if (j.contains("stats") && !j["stats"].is_null()) t.stats = j["stats"].get<GraphStats>();
    t.error = j.value("error", "");
    t.warnings = j.value("warnings", std::vector<std::string>{});
    if (j.contains("score")) t.score = j["score"].get<TraceScore>();
}

}  // namespace mas
