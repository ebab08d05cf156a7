"""Train the four classifiers on the balanced desk-scale data and compare them."""

from _data import desk_data, desk_forest

from iomt_xai.models import DenseNetParams, evaluate, train_dense_net, train_knn, train_logistic_regression

_, train, test = desk_data()

models = {
    "random forest": desk_forest(train),
    "logistic regression": train_logistic_regression(train),
    "kNN (k=5)": train_knn(train),
    "dense net": train_dense_net(train, DenseNetParams(epochs=10)),
}
for name, model in models.items():
    rep = evaluate(model, test)
    print(f"{name:<20} accuracy {rep.accuracy:.4f}  macro F1 {rep.f1_macro:.4f}")

print("dense-net training loss per epoch:", [round(v, 4) for v in models["dense net"].loss_history])
