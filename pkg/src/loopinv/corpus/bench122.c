// Code2Inv-style 122: sn tracks i with a disjunctive exit condition
int sn;
int i;
int size;
assume(size >= 0);
sn = 0;
i = 1;
while (i <= size) {
  sn = sn + 1;
  i = i + 1;
}
assert(sn == size || sn == 0);
