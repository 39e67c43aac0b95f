#include <sstream>

#include "doctest.h"
#include "dpcr/core.hpp"
#include "dpcr/io.hpp"
#include "dpcr/rng.hpp"
#include "dpcr/workload.hpp"

using namespace dpcr;

namespace {

Dataset make_dataset(std::size_t dom, std::initializer_list<ItemId> items) {
  Dataset d(dom);
  for (ItemId x : items) d.add(x);
  return d;
}

}  // namespace

TEST_CASE("evaluate_query basics") {
  const auto d5 = make_dataset(8, {0, 1, 2, 3, 4});
  CHECK(evaluate_query(LinearQuery::counting(8), d5) == 5.0);

  CHECK(evaluate_query(LinearQuery::counting(8), Dataset(8)) == 0.0);

  // weights all 0.5 on multiset {a,a,b}
  const auto d = make_dataset(4, {0, 0, 1});
  CHECK(evaluate_query(LinearQuery(std::vector<double>(4, 0.5)), d) == 1.5);
}

TEST_CASE("evaluate_query rejects domain mismatch") {
  CHECK_THROWS_AS(evaluate_query(LinearQuery::counting(4), Dataset(8)),
                  DimensionError);
}

TEST_CASE("query weights must lie in [0,1]") {
  CHECK_THROWS_AS(LinearQuery({0.5, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(LinearQuery({-0.1}), std::invalid_argument);
  CHECK_THROWS_AS(QueryClass({}), std::invalid_argument);
}

TEST_CASE("evaluate_query is linear in multiplicities") {
  NoiseSource rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    Dataset d(16), d2(16);
    for (int i = 0; i < 30; ++i) {
      const auto x = static_cast<ItemId>(rng.uniform() * 16);
      d.add(x);
      d2.add(x, 2);
    }
    std::vector<double> w(16);
    for (double& v : w) v = rng.uniform();
    const LinearQuery q(w);
    CHECK(evaluate_query(q, d2) == doctest::Approx(2 * evaluate_query(q, d)));
  }
}

TEST_CASE("combine union and subtract") {
  const auto d1 = make_dataset(4, {0});
  const auto d2 = make_dataset(4, {0, 1});
  const auto u = combine(d1, d2, CombineMode::unite);
  CHECK(u.count(0) == 2);
  CHECK(u.count(1) == 1);
  CHECK(u.total() == 3);

  const auto s = combine(u, d1, CombineMode::subtract);
  CHECK(s.count(0) == 1);
  CHECK(s.count(1) == 1);

  CHECK_THROWS_AS(combine(d1, d2, CombineMode::subtract),
                  std::underflow_error);
}

TEST_CASE("combine is union-preserving for evaluate_query") {
  NoiseSource rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    Dataset d1(8), d2(8);
    for (int i = 0; i < 10; ++i) {
      d1.add(static_cast<ItemId>(rng.uniform() * 8));
      d2.add(static_cast<ItemId>(rng.uniform() * 8));
    }
    std::vector<double> w(8);
    for (double& v : w) v = rng.uniform();
    const LinearQuery q(w);
    const double lhs = evaluate_query(q, combine(d1, d2, CombineMode::unite));
    CHECK(lhs ==
          doctest::Approx(evaluate_query(q, d1) + evaluate_query(q, d2)));
  }
}

TEST_CASE("replay_exact on a tiny stream") {
  const std::vector<UpdateEvent> s = {UpdateEvent::ins(1, 0),
                                      UpdateEvent::ins(2, 1),
                                      UpdateEvent::del(3, 0)};
  const auto d3 = replay_exact(s, 3, 4);
  CHECK(d3.total() == 1);
  CHECK(d3.count(1) == 1);

  const auto d2 = replay_exact(s, 2, 4);
  CHECK(d2.total() == 2);
  CHECK(d2.count(0) == 1);
}

TEST_CASE("replay_exact rejects bad streams") {
  CHECK_THROWS_AS(replay_exact({UpdateEvent::del(1, 0)}, 1, 4),
                  InvalidStreamError);
  CHECK_THROWS_AS(
      replay_exact({UpdateEvent::ins(2, 0), UpdateEvent::ins(2, 1)}, 2, 4),
      InvalidStreamError);
}

TEST_CASE("replay_exact matches incremental maintenance on random streams") {
  WorkloadSpec ws;
  ws.kind = WorkloadKind::fully_dynamic_churn;
  ws.horizon = 10'000;
  ws.domain_size = 16;
  ws.target_live = 40;
  ws.seed = 99;
  const auto stream = gen_stream(ws);

  Dataset inc(16);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const auto& e = stream[i];
    if (e.op == Op::insert) inc.add(e.item);
    if (e.op == Op::remove) inc.remove(e.item);
    if (e.t % 997 == 0 || i + 1 == stream.size())
      CHECK(replay_exact(stream, e.t, 16) == inc);
  }
}

TEST_CASE("replay_exact is prefix-determined") {
  const std::vector<UpdateEvent> s = {UpdateEvent::ins(1, 0),
                                      UpdateEvent::ins(2, 1),
                                      UpdateEvent::del(3, 0)};
  CHECK(replay_exact(s, 2, 4) ==
        replay_exact({s.begin(), s.begin() + 2}, 2, 4));
}

TEST_CASE("insertion-only streams have live count = update count") {
  WorkloadSpec ws;
  ws.kind = WorkloadKind::dense_insert;
  ws.horizon = 500;
  ws.domain_size = 8;
  ws.seed = 3;
  const auto stream = gen_stream(ws);
  const auto st = stream_stats(stream, 500, 8);
  CHECK(st.updates == 500);
  CHECK(st.live == 500);
}

TEST_CASE("stream file round trip") {
  const std::vector<UpdateEvent> s = {UpdateEvent::ins(1, 3),
                                      UpdateEvent::noop_at(2),
                                      UpdateEvent::del(3, 3)};
  std::ostringstream os;
  write_stream(os, s);
  CHECK(os.str() == "1,ins,3\n2,noop,\n3,del,3\n");
  std::istringstream is(os.str());
  const auto back = read_stream(is);
  REQUIRE(back.size() == 3);
  CHECK(back[0].op == Op::insert);
  CHECK(back[1].op == Op::noop);
  CHECK(back[2].op == Op::remove);
  CHECK(back[2].item == 3);
}

TEST_CASE("stream reader rejects timestamp gaps and junk") {
  std::istringstream gap("1,ins,0\n3,ins,1\n");
  CHECK_THROWS_AS(read_stream(gap), InvalidStreamError);
  std::istringstream junk("1,flip,0\n");
  CHECK_THROWS_AS(read_stream(junk), InvalidStreamError);
  std::istringstream bad_t("x,ins,0\n");
  CHECK_THROWS_AS(read_stream(bad_t), InvalidStreamError);
}
