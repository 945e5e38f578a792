from transformers import pipeline

gen = pipeline("text-generation", model="gpt2")
out = gen("Once upon a time")
