#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eiu/tensor.hpp"

using namespace eiu;

namespace {

Tensor vec(std::vector<double> v, bool rg = false) {
    const std::size_t n = v.size();
    return Tensor(Shape{n}, std::move(v), rg);
}

Tensor mat(std::size_t r, std::size_t c, std::vector<double> v, bool rg = false) {
    return Tensor(Shape{r, c}, std::move(v), rg);
}

}  // namespace

TEST_CASE("matmul basics") {
    // identity passthrough
    Tensor I = mat(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor a = mat(3, 2, {1, 2, 3, 4, 5, 6});
    Tensor r = matmul(I, a);
    CHECK(r.data() == a.data());

    // hand-evaluated dot products
    Tensor x = mat(2, 2, {1, 2, 3, 4});
    Tensor y = mat(2, 1, {5, 6});
    Tensor p = matmul(x, y);
    CHECK(p(0, 0) == 17.0);
    CHECK(p(1, 0) == 39.0);

    CHECK_THROWS_AS(matmul(mat(2, 3, std::vector<double>(6, 0.0)),
                           mat(2, 3, std::vector<double>(6, 0.0))),
                    ShapeError);
}

TEST_CASE("elementwise binary") {
    Tensor x = vec({2, 3});
    CHECK(ew(Binary::add, x, Tensor::scalar(0.0)).data() == x.data());
    CHECK(ew(Binary::mul, x, Tensor::scalar(1.0)).data() == x.data());

    Tensor r = ew(Binary::mul, vec({2, 3}), vec({4, 5}));
    CHECK(r.at(0) == 8.0);
    CHECK(r.at(1) == 15.0);

    CHECK_THROWS_AS(ew(Binary::add, vec({1, 2}), vec({1, 2, 3})), ShapeError);
}

TEST_CASE("elementwise unary") {
    CHECK(ew(Unary::sigmoid, Tensor::scalar(0.0)).item() == 0.5);
    CHECK(ew(Unary::sigmoid, Tensor::scalar(1.0)).item() ==
          doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(ew(Unary::relu, Tensor::scalar(-3.0)).item() == 0.0);
    CHECK_THROWS_AS(ew(Unary::log, vec({1.0, 0.0})), DomainError);
    CHECK_THROWS_WITH_AS(ew(Unary::log, vec({1.0, -2.0})),
                         doctest::Contains("index 1"), DomainError);
}

TEST_CASE("concat") {
    Tensor a = vec({1, 2});
    Tensor b = vec({3, 4, 5});
    Tensor c = concat({a, b}, 0);
    CHECK(c.shape() == Shape{5});
    CHECK(c.at(4) == 5.0);

    // three 128-vectors concatenate to the pre-fusion width
    Tensor h = Tensor::zeros({128});
    CHECK(concat({h, h, h}, 0).shape() == Shape{384});

    CHECK_THROWS_AS(concat({mat(2, 3, std::vector<double>(6, 0.0)),
                            mat(2, 4, std::vector<double>(8, 0.0))},
                           0),
                    ShapeError);

    Tensor m1 = mat(1, 2, {1, 2});
    Tensor m2 = mat(2, 2, {3, 4, 5, 6});
    Tensor m = concat({m1, m2}, 0);
    CHECK(m.shape() == Shape{3, 2});
    CHECK(m(2, 1) == 6.0);
}

TEST_CASE("reduce") {
    Tensor row = vec({7, 7, 7});
    CHECK(reduce(Reduction::mean, row, 0).item() == 7.0);
    CHECK(reduce(Reduction::sum, vec({1, 2, 3}), 0).item() == 6.0);

    // max routes gradient to the argmax entry only
    Tensor x = vec({1, 7, 3}, true);
    {
        Tape tape;
        Tensor m = reduce(Reduction::max, x, 0);
        CHECK(m.item() == 7.0);
        tape.backward(m);
    }
    CHECK(x.grad() == std::vector<double>{0, 1, 0});

    // ties go to the lowest index
    Tensor t = vec({5, 5}, true);
    {
        Tape tape;
        tape.backward(reduce(Reduction::max, t, 0));
    }
    CHECK(t.grad() == std::vector<double>{1, 0});

    CHECK_THROWS_AS(reduce(Reduction::sum, vec({1}), 3), DomainError);
}

TEST_CASE("softmax values and properties") {
    Tensor u = softmax(vec({2.0, 2.0, 2.0, 2.0}), 0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(u.at(i) == doctest::Approx(0.25).epsilon(1e-12));

    Tensor s = softmax(vec({0.0, std::log(3.0)}), 0);
    CHECK(s.at(0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s.at(1) == doctest::Approx(0.75).epsilon(1e-12));

    // shift invariance
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = Tensor::uniform({6}, rng, -5, 5);
        const double c = rng.uniform(-100, 100);
        Tensor shifted = x.clone();
        for (auto& v : shifted.data()) v += c;
        Tensor s1 = softmax(x, 0), s2 = softmax(shifted, 0);
        double sum = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(std::fabs(s1.at(i) - s2.at(i)) < 1e-12);
            CHECK(s1.at(i) > 0.0);
            sum += s1.at(i);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-6);
    }

    // overflow safety via max subtraction
    Tensor big = softmax(vec({1000.0, 1000.0}), 0);
    CHECK(big.at(0) == doctest::Approx(0.5).epsilon(1e-12));

    Tensor bad = vec({1.0, std::nan("")});
    CHECK_THROWS_AS(softmax(bad, 0), NumericError);
}

TEST_CASE("backward basics") {
    // linear functional: grad is all ones
    Tensor x = mat(2, 3, {1, 2, 3, 4, 5, 6}, true);
    {
        Tape tape;
        tape.backward(reduce(Reduction::sum, reshape(x, {6}), 0));
    }
    CHECK(x.grad() == std::vector<double>(6, 1.0));

    // analytic derivative of sum(x*x)
    Tensor y = vec({1, 2}, true);
    {
        Tape tape;
        Tensor loss = reduce(Reduction::sum, ew(Unary::square, y), 0);
        tape.backward(loss);
    }
    CHECK(y.grad() == std::vector<double>{2, 4});

    // two backward calls accumulate
    Tensor z = vec({1, 2}, true);
    {
        Tape tape;
        Tensor loss = reduce(Reduction::sum, ew(Unary::square, z), 0);
        tape.backward(loss);
        tape.backward(loss);
    }
    CHECK(z.grad() == std::vector<double>{4, 8});

    // non-scalar loss rejected
    Tensor w = vec({1, 2}, true);
    {
        Tape tape;
        Tensor out = ew(Unary::square, w);
        CHECK_THROWS_AS(tape.backward(out), ContractError);
    }
}

TEST_CASE("backward zero-fills unreachable tensors") {
    Tensor used = vec({1, 2}, true);
    Tensor unused = vec({3, 4}, true);
    {
        Tape tape;
        Tensor a = reduce(Reduction::sum, used, 0);
        Tensor b = reduce(Reduction::sum, unused, 0);  // on the tape, unreachable from a
        (void)b;
        tape.backward(a);
    }
    CHECK(used.grad() == std::vector<double>{1, 1});
    CHECK(unused.grad() == std::vector<double>{0, 0});
}

TEST_CASE("gradient linearity across separate losses") {
    Rng rng(42);
    Tensor x = Tensor::uniform({5}, rng, -2, 2, true);

    auto loss1 = [&]() { return reduce(Reduction::sum, ew(Unary::square, x), 0); };
    auto loss2 = [&]() {
        return reduce(Reduction::sum, ew(Unary::sigmoid, x), 0);
    };

    std::vector<double> joint;
    {
        x.zero_grad();
        Tape tape;
        tape.backward(ew(Binary::add, loss1(), loss2()));
        joint = x.grad();
    }
    std::vector<double> separate;
    {
        x.zero_grad();
        Tape tape;
        tape.backward(loss1());
        tape.backward(loss2());
        separate = x.grad();
    }
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::fabs(joint[i] - separate[i]) < 1e-12);
    }
}

TEST_CASE("forward determinism") {
    auto run = [] {
        Rng rng(7);
        Tensor a = Tensor::uniform({4, 4}, rng, -1, 1);
        Tensor b = Tensor::uniform({4, 4}, rng, -1, 1);
        return softmax(matmul(ew(Unary::tanh, a), b), 1).data();
    };
    CHECK(run() == run());
}

TEST_CASE("grad_check covers every registered op") {
    Rng rng(123);
    const double tol = 1e-4;

    const int points = 10;
    for (int pt = 0; pt < points; ++pt) {
        const std::uint64_t seed = 1000 + pt;

        // matmul
        {
            Rng r(seed);
            Tensor a = Tensor::uniform({3, 4}, r, -1, 1, true);
            Tensor b = Tensor::uniform({4, 2}, r, -1, 1, true);
            auto f = [&] { return reduce(Reduction::sum, reshape(ew(Unary::square, matmul(a, b)), {6}), 0); };
            CHECK(grad_check(f, {{"a", a}, {"b", b}}).max_rel_err < tol);
        }
        // binary kinds incl. scalar broadcast
        for (Binary k : {Binary::add, Binary::sub, Binary::mul}) {
            Rng r(seed);
            Tensor a = Tensor::uniform({5}, r, -1, 1, true);
            Tensor b = Tensor::uniform({5}, r, -1, 1, true);
            Tensor s = Tensor::uniform({}, r, -1, 1, true);
            auto f = [&] {
                Tensor e = ew(k, a, b);
                Tensor e2 = ew(k, e, s);
                return reduce(Reduction::sum, ew(Unary::square, e2), 0);
            };
            CHECK(grad_check(f, {{"a", a}, {"b", b}, {"s", s}}).max_rel_err < tol);
        }
        // unary kinds
        for (Unary k : {Unary::sigmoid, Unary::tanh, Unary::relu, Unary::exp, Unary::log,
                        Unary::neg, Unary::square, Unary::sqrt, Unary::recip}) {
            Rng r(seed);
            // keep inputs strictly positive and away from relu kink
            Tensor a = Tensor::uniform({6}, r, 0.3, 2.0, true);
            auto f = [&] { return reduce(Reduction::sum, ew(k, a), 0); };
            CHECK(grad_check(f, {{"a", a}}).max_rel_err < tol);
        }
        // concat + slice + transpose + reshape
        {
            Rng r(seed);
            Tensor a = Tensor::uniform({2, 3}, r, -1, 1, true);
            Tensor b = Tensor::uniform({2, 2}, r, -1, 1, true);
            auto f = [&] {
                Tensor c = concat({a, b}, 1);             // 2x5
                Tensor s = slice(c, 1, 1, 3);             // 2x3
                Tensor t = transpose(s);                  // 3x2
                Tensor flat = reshape(t, {6});
                return reduce(Reduction::sum, ew(Unary::square, flat), 0);
            };
            CHECK(grad_check(f, {{"a", a}, {"b", b}}).max_rel_err < tol);
        }
        // reduce kinds
        for (Reduction k : {Reduction::sum, Reduction::mean, Reduction::max}) {
            Rng r(seed);
            Tensor a = Tensor::uniform({3, 4}, r, -1, 1, true);
            auto f = [&] {
                Tensor red = reduce(k, a, 1);
                return reduce(Reduction::sum, ew(Unary::square, red), 0);
            };
            CHECK(grad_check(f, {{"a", a}}).max_rel_err < tol);
        }
        // softmax
        {
            Rng r(seed);
            Tensor a = Tensor::uniform({2, 5}, r, -2, 2, true);
            Tensor w = Tensor::uniform({2, 5}, r, -1, 1);
            auto f = [&] {
                Tensor s = softmax(a, 1);
                return reduce(Reduction::sum, reshape(ew(Binary::mul, s, w), {10}), 0);
            };
            CHECK(grad_check(f, {{"a", a}}).max_rel_err < tol);
        }
        // rowwise / colwise
        for (Binary k : {Binary::add, Binary::sub, Binary::mul}) {
            Rng r(seed);
            Tensor m = Tensor::uniform({3, 4}, r, -1, 1, true);
            Tensor rv = Tensor::uniform({4}, r, -1, 1, true);
            Tensor cv = Tensor::uniform({3}, r, -1, 1, true);
            auto f = [&] {
                Tensor o = colwise(k, rowwise(k, m, rv), cv);
                return reduce(Reduction::sum, reshape(ew(Unary::square, o), {12}), 0);
            };
            CHECK(grad_check(f, {{"m", m}, {"rv", rv}, {"cv", cv}}).max_rel_err < tol);
        }
        // im2row
        {
            Rng r(seed);
            Tensor x = Tensor::uniform({5, 3}, r, -1, 1, true);
            auto f = [&] {
                Tensor w = im2row(x, 2);  // 4 x 6
                return reduce(Reduction::sum, reshape(ew(Unary::square, w), {24}), 0);
            };
            CHECK(grad_check(f, {{"x", x}}).max_rel_err < tol);
        }
        // powc
        {
            Rng r(seed);
            Tensor x = Tensor::uniform({4}, r, 0.2, 1.5, true);
            auto f = [&] { return reduce(Reduction::sum, powc(x, 2.7), 0); };
            CHECK(grad_check(f, {{"x", x}}).max_rel_err < tol);
        }
    }

    // symmetric differences are exact for linear maps
    Tensor lin = Tensor::uniform({4}, rng, -1, 1, true);
    auto f = [&] { return reduce(Reduction::sum, lin, 0); };
    CHECK(grad_check(f, {{"lin", lin}}).max_rel_err < 1e-10);

    // sigmoid o matmul composition
    {
        Rng r(5);
        Tensor a = Tensor::uniform({2, 3}, r, -1, 1, true);
        Tensor b = Tensor::uniform({3, 2}, r, -1, 1, true);
        auto g = [&] {
            Tensor s = ew(Unary::sigmoid, matmul(a, b));
            return reduce(Reduction::sum, reshape(s, {4}), 0);
        };
        CHECK(grad_check(g, {{"a", a}, {"b", b}}).max_rel_err < 1e-6);
    }

    CHECK_THROWS_AS(grad_check([&] { return Tensor::scalar(0.0); }, {}, 1.0), ContractError);
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);

    // tensors without requires_grad never accumulate gradient
    Tensor c = vec({1, 2});
    Tensor p = vec({1, 1}, true);
    {
        Tape tape;
        Tensor loss = reduce(Reduction::sum, ew(Binary::mul, c, p), 0);
        tape.backward(loss);
    }
    CHECK(!c.has_grad());
    CHECK(p.grad() == std::vector<double>{1, 2});
}

TEST_CASE("tape introspection") {
    Tensor a = vec({1, 2}, true);
    Tape tape;
    Tensor b = ew(Unary::square, a);
    Tensor l = reduce(Reduction::sum, b, 0);
    (void)l;
    // leaf + square + sum
    CHECK(tape.node_count() == 3);
    CHECK(tape.info(0).op == "leaf");
    CHECK(tape.info(1).op == "square");
    CHECK(tape.info(2).op == "sum");
    CHECK(tape.info(2).inputs == std::vector<std::int64_t>{1});
}
