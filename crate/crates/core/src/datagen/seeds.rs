use super::SeedGroup;

/// Hand-written seed programs: each group solves one problem two different ways.
const BUILTIN: &[(&str, &[&str])] = &[
    (
        "array_sum",
        &[
            "def sum(a, n) {
    s = 0;
    i = 0;
    while (i < n) {
        s = s + a[i];
        i = i + 1;
    }
    return s;
}",
            "def total(xs, len) {
    acc = 0;
    for (k = len - 1; k >= 0; k = k - 1) {
        acc = xs[k] + acc;
    }
    return acc;
}",
        ],
    ),
    (
        "max_scan",
        &[
            "def max(a, n) {
    m = a[0];
    for (i = 1; i < n; i = i + 1) {
        if (a[i] > m) {
            m = a[i];
        }
    }
    return m;
}",
            "def largest(a, n) {
    best = 0;
    i = 1;
    while (i < n) {
        if (a[best] < a[i]) {
            best = i;
        }
        i = i + 1;
    }
    return a[best];
}",
        ],
    ),
    (
        "gcd",
        &[
            "def gcd(x, y) {
    while (y != 0) {
        t = x % y;
        x = y;
        y = t;
    }
    return x;
}",
            "def gcd(a, b) {
    while (a != b) {
        if (a > b) {
            a = a - b;
        } else {
            b = b - a;
        }
    }
    return a;
}",
        ],
    ),
    (
        "linear_search",
        &[
            "def find(a, n, key) {
    i = 0;
    while (i < n) {
        if (a[i] == key) {
            return i;
        }
        i = i + 1;
    }
    return -1;
}",
            "def index_of(a, n, key) {
    pos = -1;
    for (i = 0; i < n; i = i + 1) {
        if (pos == -1 && a[i] == key) {
            pos = i;
        }
    }
    return pos;
}",
        ],
    ),
    (
        "count_even",
        &[
            "def evens(a, n) {
    c = 0;
    for (i = 0; i < n; i = i + 1) {
        if (a[i] % 2 == 0) {
            c = c + 1;
        }
    }
    return c;
}",
            "def count_even(a, n) {
    c = 0;
    i = 0;
    while (i < n) {
        switch (a[i] % 2) {
            case 0: {
                c = c + 1;
            }
            default: {
                skip;
            }
        }
        i = i + 1;
    }
    return c;
}",
        ],
    ),
    (
        "nested_accumulate",
        &[
            "def grid(n, m) {
    s = 0;
    for (i = 0; i < n; i = i + 1) {
        for (j = 0; j < m; j = j + 1) {
            s = s + i * j;
        }
    }
    return s;
}",
            "def grid(rows, cols) {
    s = 0;
    r = 0;
    while (r < rows) {
        row = 0;
        c = 0;
        while (c < cols) {
            row = row + c;
            c = c + 1;
        }
        s = s + row * r;
        r = r + 1;
    }
    return s;
}",
        ],
    ),
    (
        "factorial",
        &[
            "def fact(n) {
    r = 1;
    for (i = 2; i <= n; i = i + 1) {
        r = r * i;
    }
    return r;
}",
            "def fact(n) {
    if (n < 0) {
        throw n;
    }
    r = 1;
    k = n;
    while (k > 1) {
        r = r * k;
        k = k - 1;
    }
    return r;
}",
        ],
    ),
    (
        "reverse",
        &[
            "def reverse(a, n) {
    i = 0;
    j = n - 1;
    while (i < j) {
        t = a[i];
        a[i] = a[j];
        a[j] = t;
        i = i + 1;
        j = j - 1;
    }
    return a;
}",
            "def reverse(a, n) {
    for (i = 0; i < n / 2; i = i + 1) {
        t = a[i];
        a[i] = a[n - 1 - i];
        a[n - 1 - i] = t;
    }
    return a;
}",
        ],
    ),
    (
        "read_bounded",
        &[
            "def read_bounded(limit) {
    x = input();
    while (x < 0) {
        call warn(x);
        x = input();
    }
    if (x > limit) {
        throw x;
    }
    return x;
}",
            "def read_bounded(limit) {
    x = -1;
    while (x < 0) {
        x = input();
        if (x < 0) {
            call warn(x);
        }
    }
    if (x <= limit) {
        return x;
    }
    throw x;
}",
        ],
    ),
];

pub fn builtin_groups() -> Vec<SeedGroup> {
    BUILTIN
        .iter()
        .map(|(name, variants)| SeedGroup {
            name: name.to_string(),
            variants: variants.iter().map(|v| format!("{v}\n")).collect(),
        })
        .collect()
}
